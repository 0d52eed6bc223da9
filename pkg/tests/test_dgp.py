import json

import numpy as np
import pytest

from warnrdd import dgp
from warnrdd.errors import InputError


class TestValidate:
    def test_defaults_are_valid(self):
        dgp.DgpSpec(n=100).validate()

    @pytest.mark.parametrize(
        "kwargs, pattern",
        [
            ({"n": 0}, "positive"),
            ({"n": 10, "cutoff": 1.5}, "cutoff"),
            ({"n": 10, "compliance": (0.1, 0.9)}, "jump upward"),
            ({"n": 10, "compliance": (0.5, 0.5)}, "jump upward"),
            ({"n": 10, "noise_sd": -1.0}, "noise_sd"),
            ({"n": 10, "manipulation": 0.5}, "manipulation"),
            ({"n": 10, "manipulation_width": 0.0}, "manipulation_width"),
            ({"n": 10, "w_distribution": ("gamma", 1.0)}, "unknown"),
            ({"n": 10, "w_distribution": ("beta", -1.0, 2.0)}, "beta"),
            ({"n": 10, "baseline": ()}, "baseline"),
        ],
    )
    def test_invalid_specs_rejected(self, kwargs, pattern):
        with pytest.raises(InputError, match=pattern):
            dgp.DgpSpec(**kwargs).validate()


class TestGenerate:
    def test_same_seed_same_data(self):
        spec = dgp.DgpSpec(n=500, seed=42)
        assert dgp.generate(spec) == dgp.generate(dgp.DgpSpec(n=500, seed=42))

    def test_different_seed_different_data(self):
        a = dgp.generate(dgp.DgpSpec(n=500, seed=1))
        b = dgp.generate(dgp.DgpSpec(n=500, seed=2))
        assert a != b

    def test_instrument_follows_cutoff_rule(self):
        rows = dgp.generate(dgp.DgpSpec(n=1000, seed=3))
        assert all(row.z == (1 if row.w <= 0.4 else 0) for row in rows)

    def test_compliance_rates_approximate_spec(self):
        rows = dgp.generate(dgp.DgpSpec(n=40_000, seed=4, compliance=(0.85, 0.15)))
        below = [r.t for r in rows if r.z == 1]
        above = [r.t for r in rows if r.z == 0]
        assert np.mean(below) == pytest.approx(0.85, abs=0.02)
        assert np.mean(above) == pytest.approx(0.15, abs=0.02)

    def test_outcome_matches_structural_equation_when_noiseless(self):
        spec = dgp.DgpSpec(n=200, seed=5, noise_sd=0.0, baseline=(1.0, 2.0, 3.0), true_late=4.0)
        for row in dgp.generate(spec):
            expected = 1.0 + 2.0 * row.w + 3.0 * row.w**2 + 4.0 * row.t
            assert row.y == pytest.approx(expected, rel=1e-12)

    def test_manipulation_moves_mass_below_cutoff(self):
        base = dgp.generate(dgp.DgpSpec(n=50_000, seed=6))
        shifted = dgp.generate(dgp.DgpSpec(n=50_000, seed=6, manipulation=0.4))
        frac = lambda rows: np.mean([r.w <= 0.4 for r in rows])
        assert frac(shifted) > frac(base) + 0.005

    def test_manipulation_reflects_within_band(self):
        base = dgp.generate(dgp.DgpSpec(n=5000, seed=7))
        shifted = dgp.generate(dgp.DgpSpec(n=5000, seed=7, manipulation=0.3, manipulation_width=0.05))
        moved = [(b.w, s.w) for b, s in zip(base, shifted) if b.w != s.w]
        assert moved
        for old, new in moved:
            assert 0.4 < old <= 0.45
            assert new == pytest.approx(round(2 * 0.4 - old, 12))

    def test_effect_slope_changes_outcomes_away_from_cutoff(self):
        flat = dgp.DgpSpec(n=300, seed=8, noise_sd=0.0)
        sloped = dgp.DgpSpec(n=300, seed=8, noise_sd=0.0, effect_slope=2.0)
        for a, b in zip(dgp.generate(flat), dgp.generate(sloped)):
            if a.t == 1:
                assert b.y - a.y == pytest.approx(2.0 * (a.w - 0.4), abs=1e-9)

    def test_beta_distribution_shifts_mass(self):
        rows = dgp.generate(dgp.DgpSpec(n=20_000, seed=9, w_distribution=("beta", 8.0, 2.0)))
        assert np.mean([r.w for r in rows]) == pytest.approx(0.8, abs=0.02)

    def test_covariate_correlated_with_running_variable(self):
        rows = dgp.generate(dgp.DgpSpec(n=5000, seed=10))
        w = np.array([r.w for r in rows])
        x = np.array([r.x[0] for r in rows])
        assert np.corrcoef(w, x)[0, 1] > 0.9

    def test_true_late_is_spec_value(self):
        assert dgp.true_late(dgp.DgpSpec(n=10, true_late=7.5)) == 7.5


class TestSpecIo:
    def test_load_spec_round_trip(self, tmp_path):
        path = tmp_path / "spec.json"
        path.write_text(json.dumps({"n": 50, "seed": 3, "compliance": [0.8, 0.2]}))
        spec = dgp.load_spec(path)
        assert spec.n == 50 and spec.compliance == (0.8, 0.2)

    def test_load_spec_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "spec.json"
        path.write_text(json.dumps({"n": 50, "typo_key": 1}))
        with pytest.raises(InputError, match="typo_key"):
            dgp.load_spec(path)

    def test_load_spec_requires_n(self, tmp_path):
        path = tmp_path / "spec.json"
        path.write_text("{}")
        with pytest.raises(InputError, match="'n'"):
            dgp.load_spec(path)

    def test_write_truth_contents(self, tmp_path):
        spec = dgp.DgpSpec(n=20, true_late=3.0, seed=11)
        path = tmp_path / "truth.json"
        dgp.write_truth(spec, path)
        payload = json.loads(path.read_text())
        assert payload["true_late"] == 3.0
        assert payload["seed"] == 11
        assert "PCG64" in payload["generator"]
        assert payload["spec"]["n"] == 20
