"""Synthetic population generator tests."""

import numpy as np
import pytest

from fairaudit.errors import ConfigError
from fairaudit.synth import (
    LABEL_NOISE,
    OUTCOME_SHIFT,
    SynthConfig,
    generate,
    inject_bias,
)


def dataset_bytes(d):
    return (
        d.features.tobytes()
        + d.outcome.tobytes()
        + d.is_protected.tobytes()
        + d.row_ids.tobytes()
    )


class TestGenerate:
    def test_exchangeable_groups_have_close_outcome_rates(self):
        d = generate(SynthConfig(n=100_000, seed=0, group_intercept_shift=0.0))
        prot_rate = d.outcome[d.is_protected].mean()
        unprot_rate = d.outcome[~d.is_protected].mean()
        assert abs(prot_rate - unprot_rate) < 0.02

    def test_positive_shift_raises_protected_unfavorable_rate(self):
        d = generate(SynthConfig(n=50_000, seed=1, group_intercept_shift=0.5))
        prot_rate = d.outcome[d.is_protected].mean()
        unprot_rate = d.outcome[~d.is_protected].mean()
        assert prot_rate > unprot_rate + 0.05

    def test_same_seed_identical_bytes(self):
        config = SynthConfig(n=3000, seed=42, group_intercept_shift=0.3)
        assert dataset_bytes(generate(config)) == dataset_bytes(generate(config))

    def test_different_seed_differs(self):
        a = generate(SynthConfig(n=1000, seed=1))
        b = generate(SynthConfig(n=1000, seed=2))
        assert dataset_bytes(a) != dataset_bytes(b)

    def test_group_mix_respected(self):
        d = generate(SynthConfig(n=20_000, seed=3, group_mix=0.25))
        assert d.n_protected / d.n == pytest.approx(0.25, abs=0.02)

    def test_invalid_configs(self):
        with pytest.raises(ConfigError):
            SynthConfig(n=2)
        with pytest.raises(ConfigError):
            SynthConfig(group_mix=1.0)
        with pytest.raises(ConfigError):
            SynthConfig(d=3, coefficients=(1.0,))


class TestInjectBias:
    def test_zero_magnitude_is_identity(self):
        d = generate(SynthConfig(n=2000, seed=5))
        out = inject_bias(d, OUTCOME_SHIFT, 0.0, seed=9)
        assert dataset_bytes(out) == dataset_bytes(d)

    def test_outcome_shift_drops_protected_favorable_rate(self):
        d = generate(SynthConfig(n=50_000, seed=6))
        before = (d.outcome[d.is_protected] == 0).mean()
        out = inject_bias(d, OUTCOME_SHIFT, 0.2, seed=1)
        after = (out.outcome[out.is_protected] == 0).mean()
        # favorable mass shrinks by ~magnitude * reachable mass
        assert after == pytest.approx(before * 0.8, abs=0.01)
        # unprotected untouched
        assert np.array_equal(
            out.outcome[~out.is_protected], d.outcome[~d.is_protected]
        )

    def test_label_noise_flips_both_directions(self):
        d = generate(SynthConfig(n=50_000, seed=7))
        out = inject_bias(d, LABEL_NOISE, 0.3, seed=2)
        prot = d.is_protected
        flipped_to_unfav = ((d.outcome == 0) & (out.outcome == 1) & prot).sum()
        flipped_to_fav = ((d.outcome == 1) & (out.outcome == 0) & prot).sum()
        assert flipped_to_unfav > 0 and flipped_to_fav > 0

    def test_not_additive(self):
        d = generate(SynthConfig(n=5000, seed=8))
        twice = inject_bias(inject_bias(d, OUTCOME_SHIFT, 0.1, seed=3), OUTCOME_SHIFT, 0.1, seed=3)
        once = inject_bias(d, OUTCOME_SHIFT, 0.2, seed=3)
        assert not np.array_equal(twice.outcome, once.outcome)

    def test_unknown_mechanism(self):
        d = generate(SynthConfig(n=200, seed=9))
        with pytest.raises(ConfigError, match="mechanism"):
            inject_bias(d, "swap_everything", 0.1)

    def test_deterministic(self):
        d = generate(SynthConfig(n=2000, seed=10))
        a = inject_bias(d, LABEL_NOISE, 0.2, seed=4)
        b = inject_bias(d, LABEL_NOISE, 0.2, seed=4)
        assert dataset_bytes(a) == dataset_bytes(b)
