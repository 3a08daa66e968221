"""Walk the selector one stage at a time on the metamer scene."""

import numpy as np

from hsiband.bandstats import correlation_matrix, csnr_high_probability, csnr_table
from hsiband.cube_io import pool_patch_samples
from hsiband.infotheory import score_bands
from hsiband.selector import SelectionConfig, candidate_pool, diversity_refine, informed_select
from hsiband.synthgen import default_scene_spec, generate_scene

scene = generate_scene(default_scene_spec())
cube, patches = scene.cube, scene.patches
cfg = SelectionConfig()

# step 0: relevance and JMIM order on pooled patch pixels
samples, labels = pool_patch_samples(cube, patches)
scores = score_bands(samples, labels, cfg.k_candidates, cfg.bins, cube.wavelengths)
print("jmim top", scores.ranked)
print("relevance of 114:", round(float(scores.relevance_mi[114]), 4), "max elsewhere:", round(float(np.delete(scores.relevance_mi, 114).max()), 4))

corr = correlation_matrix(cube.pixels(cfg.max_corr_pixels))
table = csnr_table(cube, patches, cfg.draws, cfg.seed)
profile = csnr_high_probability(table, cfg.csnr_percentile)
print("csnr threshold", round(profile.threshold, 3), "p_hi at 114", profile.p_hi[114])

# step 1: pool
log = []
pool = candidate_pool(scores, corr, profile, cfg, log)
print("pool size", len(pool))

# step 2: greedy pick
prov = informed_select(pool, cfg, log)
print("provisional", prov)

# step 3: diversity pass
res = diversity_refine(prov, corr, pool, cfg, cube.wavelengths, log)
print("final", res.channels, [round(w, 1) for w in res.wavelengths_nm])
for d in log:
    if d.action != "considered":
        print(f"  {d.action:9s} {d.channel}: {d.reason}")
