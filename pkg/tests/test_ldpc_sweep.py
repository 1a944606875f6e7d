import numpy as np
import pytest

from qframekit.ldpc import design_matrix, sweep_performance, throughput_mbps, write_sweep_csv

DIST_60x200 = {2: 84, 3: 48, 6: 68}


@pytest.fixture(scope="module")
def code():
    return design_matrix(n=200, target_qber=0.03, row_weight=12, m=60,
                         column_weights=DIST_60x200,
                         rng=np.random.default_rng(7))


class TestThroughputModel:
    @pytest.mark.parametrize("mean_iter,expect", [
        (4.1070, 52.9319),
        (8.6785, 25.0494),
        (17.9455, 12.1140),
    ])
    def test_reference_rows(self, mean_iter, expect):
        got = throughput_mbps(200, mean_iter)
        # agreement to four significant figures
        assert got == pytest.approx(expect, rel=5e-5)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            throughput_mbps(200, 0.0)


class TestSweep:
    def test_zero_qber_always_succeeds(self, code):
        rows = sweep_performance(code, [0.0], trials=200,
                                 rng=np.random.default_rng(0))
        assert rows[0].success_rate == 1.0
        assert rows[0].mean_iterations == 1.0

    def test_monotone_in_qber(self, code):
        rows = sweep_performance(code, [0.01, 0.025, 0.035, 0.05], trials=600,
                                 rng=np.random.default_rng(1))
        rates = [r.success_rate for r in rows]
        for a, b in zip(rates, rates[1:]):
            sigma = 2 * np.sqrt(0.25 / 600)
            assert b <= a + 2 * sigma

    def test_error_models_differ_in_spread(self, code):
        fixed = sweep_performance(code, [0.025], trials=800, error_model="fixed_count",
                                  rng=np.random.default_rng(2))
        bern = sweep_performance(code, [0.025], trials=800, error_model="bernoulli",
                                 rng=np.random.default_rng(2))
        # Bernoulli mixes in heavier error counts, so it can only do worse
        assert bern[0].success_rate <= fixed[0].success_rate + 0.02

    def test_unknown_error_model(self, code):
        with pytest.raises(ValueError):
            sweep_performance(code, [0.03], trials=10, error_model="gauss")

    def test_deterministic_and_chunk_invariant(self, code):
        a = sweep_performance(code, [0.03], trials=500, batch=100,
                              rng=np.random.default_rng(5))
        b = sweep_performance(code, [0.03], trials=500, batch=100,
                              rng=np.random.default_rng(5))
        assert a[0].successes == b[0].successes
        assert a[0].mean_iterations == b[0].mean_iterations

    def test_csv_schema(self, code, tmp_path):
        rows = sweep_performance(code, [0.03], trials=50,
                                 rng=np.random.default_rng(6))
        path = tmp_path / "sweep.csv"
        write_sweep_csv(path, rows)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == ("qber,trials,successes,success_rate,"
                            "mean_iterations,mean_iterations_all,throughput_mbps")
        fields = lines[1].split(",")
        assert fields[0] == "0.03" and fields[1] == "50"
