"""Build a synthetic scene with an RGB metamer and look at why RGB misses it."""

import numpy as np

from hsiband.synthgen import build_sensor_model, default_scene_spec, generate_scene, make_metamer_pair, NirBump

spec = default_scene_spec()
scene = generate_scene(spec)
print(scene.summary())

sensor = build_sensor_model(spec.axis)
print("sensor shape", sensor.response.shape)
print("blind channels start at", int(np.argmax(sensor.blind)), "->", spec.axis[int(np.argmax(sensor.blind))], "nm")

# a second pair: broad bump instead of a single channel
pair = make_metamer_pair(sensor, 0.35, NirBump(center=105, width=3.0, amplitude=0.4))
print("rgb of a", sensor.project(pair.spectrum_a))
print("rgb of b", sensor.project(pair.spectrum_b))
print("nir separation", round(pair.nir_separation, 4))

# the 8-bit render can't tell the two patches apart
for p in scene.patches:
    x, y, w, h = p.rect
    print(p.label, scene.rgb[y:y + h, x:x + w].reshape(-1, 3).mean(axis=0).round(2))

# but one band can
target = scene.patches.get("target")
bg = scene.patches.get("background")
x, y, w, h = target.rect
t_spec = scene.cube.data[:, y:y + h, x:x + w].mean(axis=(1, 2))
x, y, w, h = bg.rect
b_spec = scene.cube.data[:, y:y + h, x:x + w].mean(axis=(1, 2))
diff = np.abs(t_spec - b_spec)
print("largest per-band difference at channel", int(diff.argmax()), "=", round(float(diff.max()), 3))
