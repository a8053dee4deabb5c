"""Exercises the Python bindings end to end. Run after building the wheel."""

import math
import os
import random
import tempfile

import distpred


def check_scoring():
    samples = [-1.0, 0.0, 0.5, 2.0]
    naive = distpred.crps_naive(samples, 0.3)
    assert abs(naive - distpred.crps_sorted(samples, 0.3)) < 1e-12
    loss, grad = distpred.crps_loss_and_grad(samples, 0.3)
    assert abs(loss - distpred.crps_pwm(samples, 0.3)) < 1e-12
    assert len(grad) == len(samples)
    assert abs(distpred.crps_gaussian_closed(0.0, 1.0, 0.0) - 0.23370) < 1e-5


def check_distribution():
    d = distpred.EmpiricalDistribution([3.0, 1.0, 2.0, 4.0])
    assert d.samples() == [1.0, 2.0, 3.0, 4.0]
    assert len(d) == 4
    assert d.cdf(2.5) == 0.5
    lo, hi = d.confidence_interval(0.5)
    assert lo <= d.quantile(0.5) <= hi
    assert sum(c for _, _, c in d.histogram(3)) == 4
    assert set(d.summary()) >= {"mean", "stddev", "kl_to_std_normal"}
    try:
        distpred.EmpiricalDistribution([])
    except ValueError:
        pass
    else:
        raise AssertionError("empty samples accepted")


def check_metrics():
    rng = random.Random(0)
    preds, ys = [], []
    for _ in range(500):
        mu = rng.uniform(-2, 2)
        preds.append([rng.gauss(mu, 1.0) for _ in range(200)])
        ys.append(rng.gauss(mu, 1.0))
    report = distpred.evaluate(preds, ys)
    assert abs(report["picp"] - 0.95) < 0.04
    assert report["qice"] < 0.03
    assert report["n_rows"] == 500
    assert distpred.picp(preds, ys) == report["picp"]


def check_model():
    assert "linear" in distpred.toy_tasks()
    x, y = distpred.generate_toy("linear", n=600, seed=3)
    model = distpred.Model(1, hidden=[32, 32], k=50, dropout=0.1, seed=1)
    history = model.fit(x, y, lr=3e-3, epochs=30, seed=2)
    assert history and all(math.isfinite(t) and math.isfinite(v) for t, v in history)

    preds = model.predict(x[:50])
    assert model.forward_count == 50
    assert all(len(p) == 50 for p in preds)
    mse = sum((sum(p) / len(p) - t) ** 2 for p, t in zip(preds, y)) / 50
    assert mse < 3.0, mse

    pooled = model.predict_mcd(x[:5], 4, seed=9)
    assert all(len(p) == 200 for p in pooled)
    assert pooled == model.predict_mcd(x[:5], 4, seed=9)

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "model.dprd")
        model.save(path)
        again = distpred.Model.load(path)
    assert again.predict(x[:50]) == preds
    assert again.k == 50 and again.input_dim == 1

    g = distpred.Model(1, hidden=[16], k=20, gaussian=True)
    g.fit(x, y, lr=3e-3, epochs=20)
    (mu, sigma), = g.predict_gaussian([[0.0]])
    assert math.isfinite(mu) and sigma > 0


if __name__ == "__main__":
    check_scoring()
    check_distribution()
    check_metrics()
    check_model()
    print("python smoke test passed")
