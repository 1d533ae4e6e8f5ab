import math

import numpy as np
import pytest

from rwm_statarb.errors import DataFormatError, InvalidArgumentError
from rwm_statarb.market_data import OuParams, PriceSeries, generate_ou, generate_ou_log, load_csv, save_csv, standard_normals

OU_SEEDS = (11, 22, 33)


def write(tmp_path, text, name="px.csv"):
    p = tmp_path / name
    p.write_bytes(text.encode("utf-8"))
    return p


class TestLoadCsv:
    def test_valid(self, tmp_path):
        s = load_csv(write(tmp_path, "timestamp,price\n1,10.5\n2,11\n5,9.75\n"))
        assert len(s) == 3
        assert s.timestamps.tolist() == [1, 2, 5]
        assert s.prices.tolist() == [10.5, 11.0, 9.75]
        assert s.symbol == "px"

    def test_crlf_and_extra_columns(self, tmp_path):
        s = load_csv(write(tmp_path, "timestamp,bid,mid\r\n1,1,2\r\n2,1,3\r\n"), price_column="mid")
        assert s.prices.tolist() == [2.0, 3.0]

    def test_negative_price_names_row(self, tmp_path):
        with pytest.raises(DataFormatError, match="row 2") as ei:
            load_csv(write(tmp_path, "timestamp,price\n1,10\n2,-5\n3,10\n"))
        assert ei.value.row == 2

    def test_duplicate_timestamp_names_row(self, tmp_path):
        text = "timestamp,price\n1,1\n2,1\n3,1\n4,1\n4,1\n"
        with pytest.raises(DataFormatError, match="row 5") as ei:
            load_csv(write(tmp_path, text))
        assert ei.value.row == 5

    def test_malformed(self, tmp_path):
        with pytest.raises(DataFormatError, match="row 1"):
            load_csv(write(tmp_path, "timestamp,price\nabc,1\n"))

    def test_empty(self, tmp_path):
        with pytest.raises(DataFormatError):
            load_csv(write(tmp_path, "timestamp,price\n"))
        with pytest.raises(DataFormatError):
            load_csv(write(tmp_path, ""))

    def test_missing_column(self, tmp_path):
        with pytest.raises(DataFormatError, match="close"):
            load_csv(write(tmp_path, "timestamp,price\n1,1\n"), price_column="close")

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_csv(tmp_path / "nope.csv")


class TestPriceSeries:
    def test_invariants(self):
        with pytest.raises(InvalidArgumentError):
            PriceSeries("x", [1, 1], [1.0, 2.0])
        with pytest.raises(InvalidArgumentError):
            PriceSeries("x", [1, 2], [1.0, 0.0])
        with pytest.raises(InvalidArgumentError):
            PriceSeries("x", [], [])
        with pytest.raises(InvalidArgumentError):
            PriceSeries("x", [1, 2], [1.0])


class TestOu:
    def test_no_dynamics(self):
        s = generate_ou(OuParams(theta=0, mu_level=3, sigma_noise=0, x0=0.7, dt=1, n_steps=5, seed=1))
        assert s.prices.tolist() == [math.exp(0.7)] * 5

    def test_deterministic_decay(self):
        x = generate_ou_log(OuParams(theta=0.5, mu_level=0, sigma_noise=0, x0=1, dt=1, n_steps=5))
        assert x.tolist() == [1, 0.5, 0.25, 0.125, 0.0625]

    def test_seeded(self):
        p = OuParams(theta=0.5, mu_level=0, sigma_noise=0.2, x0=0, dt=0.1, n_steps=300, seed=42)
        assert generate_ou(p) == generate_ou(p)
        other = generate_ou(OuParams(**{**p.__dict__, "seed": 43}))
        assert not np.array_equal(generate_ou(p).prices, other.prices)

    @pytest.mark.parametrize("kw", [dict(theta=0.5, dt=3), dict(theta=-1), dict(sigma_noise=-0.1),
                                    dict(dt=0), dict(n_steps=0)])
    def test_invalid(self, kw):
        base = dict(theta=0.5, mu_level=0, sigma_noise=0.1, x0=0, dt=0.1, n_steps=10)
        with pytest.raises(InvalidArgumentError):
            OuParams(**{**base, **kw})

    def test_box_muller_moments(self):
        z = standard_normals(np.random.default_rng(0), 200001)
        assert len(z) == 200001
        assert abs(z.mean()) < 4 / math.sqrt(len(z))
        assert z.var() == pytest.approx(1.0, abs=0.01)

    @pytest.mark.parametrize("seed", OU_SEEDS)
    def test_mean_reversion_statistics(self, seed):
        theta, dt = 0.5, 0.01
        x = generate_ou_log(OuParams(theta=theta, mu_level=0.0, sigma_noise=0.1, x0=0.0, dt=dt,
                                     n_steps=100000, seed=seed))
        assert abs(x.mean() - 0.0) <= 0.05
        ac = np.corrcoef(x[:-1], x[1:])[0, 1]
        target = 1 - theta * dt
        assert 0.99 * target - 0.01 < ac < 0.99 * target + 0.02

    def test_csv_round_trip(self, tmp_path):
        s = generate_ou(OuParams(theta=0.3, mu_level=0.1, sigma_noise=0.3, x0=0.2, dt=0.05,
                                 n_steps=500, seed=5), symbol="rt")
        save_csv(s, tmp_path / "rt.csv")
        back = load_csv(tmp_path / "rt.csv")
        assert back == s
