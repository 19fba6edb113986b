"""Smoke tests for the python module: format round trips, scale management on
known traces, and a short training run in both arms."""

import math

import pytest

import flexsim


def test_format_parsing():
    fmt = flexsim.parse_format("flex16+5")
    assert fmt.mantissa_bits == 16
    assert fmt.exponent_bits == 5
    assert fmt.mantissa_max() == 32767
    assert str(fmt) == "flex16+5"
    with pytest.raises(flexsim.FlexError):
        flexsim.parse_format("flex16+9x")


def test_quantize_roundtrip():
    fmt = flexsim.parse_format("flex16+5")
    st = flexsim.scale_from_exponent(12, fmt)
    assert st.scale == 2.0**-12

    mantissa, overflowed = flexsim.quantize_value(1.0, st, fmt)
    assert (mantissa, overflowed) == (4096, False)

    ms, gamma, overflowed = flexsim.quantize_tensor([1.0, -2.5, 3.75], st, fmt)
    assert ms == [4096, -10240, 15360]
    assert gamma == 15360
    assert not overflowed
    assert flexsim.dequantize_tensor(ms, st) == [1.0, -2.5, 3.75]

    lo, hi, eps = flexsim.representable_range(st, fmt)
    assert (lo, hi, eps) == (-8.0, 7.999755859375, 2.0**-12)


def test_saturation_counts_as_overflow():
    fmt = flexsim.parse_format("flex16+5")
    st = flexsim.ExponentState.from_exponent(13)
    mantissa, overflowed = flexsim.quantize_value(5.0, st, fmt)
    assert (mantissa, overflowed) == (32767, True)


def test_adjust_scale_fixed_point():
    fmt = flexsim.parse_format("flex16+5")
    slot = flexsim.StatsSlot()
    kappa, initialized = flexsim.init_step(slot, 4, fmt)
    assert not initialized
    kappa, initialized = flexsim.init_step(slot, 15360, fmt)
    assert initialized
    assert slot.exponent == 12

    cfg = flexsim.AutoflexConfig()
    chi = flexsim.predict_chi([1.0], 2.0**-13, cfg)
    assert chi == 2.0244140625


def test_replay_constant_stream_settles():
    res = flexsim.replay_stream([1.0] * 40)
    assert res["overflows"] == 0
    assert res["kappa"][-1] == 2.0**-13
    assert all(k == 2.0**-13 for k in res["kappa"][1:])
    assert res["gamma"][-1] == 8192


def test_fixed_point_mul_check():
    prod = flexsim.fixed_point_mul_check([4096], 12, [8192], 13, 25)
    assert prod == [33554432]
    assert prod[0] * 2.0**-25 == 1.0
    with pytest.raises(flexsim.FlexError):
        flexsim.fixed_point_mul_check([4096], 12, [8192], 13, 24)


def test_training_parity_short():
    flex = flexsim.train_run(format="flex16+5", model="mlp", iters=120, seed=7)
    ref = flexsim.train_run(format="reference", model="mlp", iters=120, seed=7)

    def tail_mean(xs, n=25):
        return sum(xs[-n:]) / n

    f, r = tail_mean(flex["loss"]), tail_mean(ref["loss"])
    assert math.isfinite(f) and math.isfinite(r)
    assert abs(f - r) / r < 0.05
    assert flex["overflows"] <= flex["kernel_invocations"] * 0.01
    # training actually learned something
    assert tail_mean(flex["loss"]) < 0.5 * tail_mean(flex["loss"][:25], 25)


def test_trace_rows():
    res = flexsim.train_run(format="flex16+5", model="mlp", iters=5, seed=3, trace=True)
    rows = res["trace"]
    assert rows, "tracing requested but no rows returned"
    for row in rows:
        assert row["phi"] == pytest.approx(row["gamma"] * row["kappa"], rel=1e-12, abs=0.0)
        assert row["phase"] in ("init", "fprop", "bprop")
