"""Round-trip rasters and label maps through the flat tensor format.

The format is deliberately tiny: 7-byte magic, dtype code, ndim, little-endian
uint32 dims, raw row-major payload. Everything the pipeline exchanges on disk
uses it.
"""

import tempfile
from pathlib import Path

import numpy as np

from pyloncrf import IGNORE, LabelMap, Raster, read_tensor, write_tensor

out = Path(tempfile.mkdtemp(prefix="pyloncrf_demo_"))

# a small probability raster: 4 x 6 pixels, 3 channels
rng = np.random.default_rng(0)
raster = Raster(rng.random((4, 6, 3), dtype=np.float32))
write_tensor(raster, out / "probs.ftn")

back = read_tensor(out / "probs.ftn")
print("raster round-trip bit-exact:", back.values.tobytes() == raster.values.tobytes())

raw = (out / "probs.ftn").read_bytes()
print("magic bytes:", raw[:7])
print("dtype code:", raw[7], "(1 = float32)")
print("ndim:", raw[8], "dims:", np.frombuffer(raw[9:21], dtype="<u4"))

# label maps carry the IGNORE=255 sentinel for unlabeled pixels
labels = np.zeros((4, 6), dtype=np.uint8)
labels[0, :] = IGNORE
write_tensor(LabelMap(labels), out / "gt.ftn")
lm = read_tensor(out / "gt.ftn")
print("ignore pixels preserved:", int((lm.labels == IGNORE).sum()), "of", labels.size)
print("files written under", out)
