"""Compare the compiled and numpy likelihood kernels on a tabletop pair.

    python3 benchmarks/bench_kernel.py [--samples N] [--points N] [--repeat N]
"""
import argparse
import time

import numpy as np

from maskreg import _kernel_py, synth
from maskreg.depthimage import object_cloud_cartesian, subsample_object
from maskreg.priors import Planar
from maskreg.sensor import prepare_cloud

try:
    from maskreg import _kernel
except ImportError:
    _kernel = None


def setup(n_points, n_samples, seed=0):
    scene = synth.tabletop_scene("box")
    motions = synth.tabletop_motions(scene, 1, seed=seed)
    (img_A, _), (img_B, _) = synth.make_sequence(scene, motions, seed=seed)
    P_B = subsample_object(img_B, n_points, seed)
    prior = Planar(scene.table.point, scene.table.normal)
    rng = np.random.default_rng(seed)
    Rs, ts = prior.sample_batch(object_cloud_cartesian(img_A), object_cloud_cartesian(img_B), rng, n_samples)
    return img_A, prepare_cloud(P_B), np.ascontiguousarray(Rs), np.ascontiguousarray(ts)


def run(module, img, prepared, Rs, ts, repeat):
    pts, QB = prepared
    cam = img.camera
    out = np.empty(len(Rs))
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        module.cloud_logliks(pts, QB, img.state, img.depth, cam.focal, cam.cx, cam.cy,
                             np.ascontiguousarray(cam.L), Rs, ts, 6.0, 1e-6, out)
        best = min(best, time.perf_counter() - t0)
    return best, out.copy()


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--samples", type=int, default=2000)
    ap.add_argument("--points", type=int, default=200)
    ap.add_argument("--repeat", type=int, default=3)
    a = ap.parse_args()
    img, prepared, Rs, ts = setup(a.points, a.samples)
    t_py, out_py = run(_kernel_py, img, prepared, Rs, ts, a.repeat)
    print(f"python    {t_py:8.4f} s  {a.samples / t_py:10.0f} transforms/s")
    if _kernel is None:
        print("compiled  not built")
        return
    t_c, out_c = run(_kernel, img, prepared, Rs, ts, a.repeat)
    print(f"compiled  {t_c:8.4f} s  {a.samples / t_c:10.0f} transforms/s  speedup {t_py / t_c:.1f}x")
    same = np.array_equal(np.isfinite(out_py), np.isfinite(out_c))
    ok = np.isfinite(out_c)
    diff = np.max(np.abs(out_py[ok] - out_c[ok])) if ok.any() else 0.0
    print(f"accepted {ok.sum()}/{len(ok)}, same rejections: {same}, max |diff| {diff:.2e}")


if __name__ == "__main__":
    main()
