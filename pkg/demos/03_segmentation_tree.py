"""Build the segmentation tree and walk its cut levels.

Leaves are watershed superpixels; merges follow the convex combination of
normalized boundary, feature and centroid dissimilarities. Cutting the
dendrogram at increasing heights yields coarser and coarser partitions.
"""

import json

import numpy as np

from pyloncrf import RunConfig, SceneSpec, build_rag, build_tree, build_ucm, cut_at, fuse_boundaries, generate_scene, watershed
from pyloncrf.regions import attach_region_means

scene = generate_scene(SceneSpec(height=96, width=96, class_count=4, noise=0.25, seed=21))
cfg = RunConfig(class_count=4)

g = fuse_boundaries(scene.boundaries)
part = watershed(g, cfg)
attach_region_means(part, scene.likelihoods, scene.elevation, scene.likelihoods)
rag = build_rag(part, g)
ucm = build_ucm(rag)

tree = build_tree(part, rag, ucm, cfg.weights)
print("leaves:", tree.leaf_count, "total nodes:", tree.node_count)
print("root area:", int(tree.area[tree.root]), "= image pixels")

heights = tree.height[tree.leaf_count:]
print(f"merge heights: first {heights[0]:.4f} last {heights[-1]:.4f} "
      f"(monotone: {bool(np.all(np.diff(heights) >= 0))})")

for level in np.linspace(0, tree.height[tree.root], 6):
    cut = cut_at(tree, float(level))
    print(f"  cut at {level:.3f}: {cut.region_count:4d} regions")

blob = json.loads(tree.to_json())
node = blob["nodes"][tree.root]
print("exported root node:", node)
