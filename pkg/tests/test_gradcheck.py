import numpy as np
import pytest

from gazekit.nn import Param, grad_check
from gazekit.selfcheck import TOLERANCE, gradcheck_report


def test_linear_model_is_exact():
    # y = w . x, loss = y  ->  dL/dw = x exactly
    x = np.array([0.5, -1.5, 2.0])
    p = Param(np.array([1.0, 2.0, 3.0]), np.zeros(1))

    def loss_and_grads():
        p.zero_grad()
        p.gw[...] = x
        return float(p.w @ x)

    worst, _ = grad_check(loss_and_grads, {"lin": p}, eps=1e-3)
    assert worst < 1e-6


def test_eps_bounds_enforced():
    p = Param(np.zeros(2), np.zeros(1))
    with pytest.raises(ValueError):
        grad_check(lambda: 0.0, {"p": p}, eps=1e-5)


def test_sign_flip_detected():
    x = np.array([1.0, 2.0])
    p = Param(np.array([0.4, -0.2]), np.zeros(1))

    def loss_and_grads():
        p.zero_grad()
        p.gw[...] = -x  # deliberately wrong sign
        return float(p.w @ x)

    worst, _ = grad_check(loss_and_grads, {"lin": p}, eps=1e-3)
    assert worst == pytest.approx(2.0, abs=1e-4)


def test_tiny_network_report_passes():
    worst, report, elapsed = gradcheck_report()
    assert worst < TOLERANCE
    # every layer kind appears in the report
    for kind in ("conv2d", "fullyconnected", "maxpool2d", "relu", "flatten", "concat"):
        assert any(name.startswith(kind) for name in report)
    assert elapsed < 60.0


def test_injected_fault_reported_as_two():
    worst, _, _ = gradcheck_report(inject_fault=True)
    assert worst == pytest.approx(2.0, abs=1e-6)
