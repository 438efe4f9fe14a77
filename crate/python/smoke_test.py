"""Smoke test for the svmcascade Python extension.

Builds the extension with cargo (unless SVMCASCADE_SKIP_BUILD is set), puts
it on sys.path and runs a short end-to-end pass.
"""

import os
import shutil
import subprocess
import sys
import tempfile

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def load_module():
    if not os.environ.get("SVMCASCADE_SKIP_BUILD"):
        subprocess.run(
            ["cargo", "build", "--release", "-p", "svmcascade-python", "--features", "extension-module"],
            cwd=ROOT,
            check=True,
        )
    lib = os.path.join(ROOT, "target", "release", "libsvmcascade.so")
    out = tempfile.mkdtemp()
    shutil.copy(lib, os.path.join(out, "svmcascade.so"))
    sys.path.insert(0, out)
    import svmcascade

    return svmcascade


def main():
    sc = load_module()

    img = sc.GrayImage(3, 2, bytes([1, 2, 3, 4, 5, 6]))
    ip = sc.IntegralPair(img)
    assert ip.rect_sum((0, 0, 3, 2)) == 21
    assert ip.rect_sqsum((1, 0, 2, 2)) == 4 + 9 + 25 + 36

    two = sc.Dataset([[0.0], [1.0]], [-1, 1])
    svm = sc.train_svm(two, sigma=1.0, c=10.0)
    assert abs(svm.decision([1.0]) - 1.0) < 1e-6
    assert svm.classify([0.0]) == -1

    moons = sc.two_moons(101, 0.1, seed=2)
    run = sc.run_adaboost_svm(moons, t_max=20, seed=2)
    clf = run.classifier()
    sigma_ini, sigma_min, _ = run.schedule
    assert all(sigma_min < s <= sigma_ini for s, _, _, _ in run.attempts())
    assert clf.error(moons) < 0.3, clf.error(moons)

    faces = sc.cross_faces(200, base=24, seed=5)
    bgs = sc.backgrounds(30, 120, 90, seed=6)
    model = sc.train_cascade(faces, bgs, base=24, max_stages=2, f_max=0.3, target_fpr=1e-9, seed=3)
    assert model.n_stages >= 1 and model.base == 24

    corpus = sc.cross_corpus(2, targets=3, base=24, seed=21)
    images = [c[0] for c in corpus]
    truth = [c[1] for c in corpus]

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "model.json")
        model.save(path)
        again = sc.CascadeModel.load(path)
        assert again.to_json() == model.to_json()
        assert again.detect(images[0]) == model.detect(images[0])

    roc = model.roc_curve(images, truth)
    assert roc[0][1] == 0 and roc[0][2] == 0.0
    fds = [p[1] for p in roc]
    assert fds == sorted(fds)
    print(f"detections in first scene: {len(model.detect(images[0]))}, final ROC point {roc[-1]}")

    try:
        sc.Dataset([[0.0], [1.0, 2.0]], [1, -1])
    except ValueError:
        pass
    else:
        raise AssertionError("ragged points must be rejected")

    print("smoke test ok")


if __name__ == "__main__":
    main()
