import json
import math
import os

import numpy as np
import pytest

from ssmgic.cli import DataError, ingest_csv, main

HERE = os.path.dirname(__file__)


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def test_ingest_plain(tmp_path):
    ts = ingest_csv(write(tmp_path, "a.csv", "1.0\n2.0\n3.0"))
    assert ts.N == 3
    np.testing.assert_array_equal(ts.values, [1.0, 2.0, 3.0])


def test_ingest_header_and_blank_lines(tmp_path):
    rows = "\n".join(f"{v:.6f}" for v in np.linspace(1, 2, 155))
    ts = ingest_csv(write(tmp_path, "b.csv", "value\r\n\r\n" + rows.replace("\n", "\r\n") + "\r\n\r\n"))
    assert ts.N == 155


def test_ingest_bad_row_cites_line(tmp_path):
    path = write(tmp_path, "c.csv", "1\n2\n3\nabc\n5\n")
    with pytest.raises(DataError, match="line 4") as info:
        ingest_csv(path)
    assert info.value.line == 4


def test_ingest_errors(tmp_path):
    with pytest.raises(DataError):
        ingest_csv(write(tmp_path, "e.csv", "\n\n"))
    with pytest.raises(DataError, match="line 2"):
        ingest_csv(write(tmp_path, "f.csv", "1\n-2\n"), log_transform=True)
    with pytest.raises(DataError, match="line 2"):
        ingest_csv(write(tmp_path, "g.csv", "1\ninf\n"))
    with pytest.raises(DataError, match="line 1"):
        ingest_csv(write(tmp_path, "h.csv", "1,2\n"))


def test_ingest_log_transform(tmp_path):
    ts = ingest_csv(write(tmp_path, "l.csv", "1\n2.718281828459045\n"), log_transform=True)
    np.testing.assert_allclose(ts.values, [0.0, 1.0])


@pytest.fixture(scope="module")
def seasonal_csv(tmp_path_factory):
    path = str(tmp_path_factory.mktemp("sim") / "seasonal.csv")
    code = main(["simulate", "--model", "seasonal", "--period", "4", "--init", "0.01,0.05,0.2",
                 "--n", "120", "--seed", "3", "--out", path])
    assert code == 0
    return path


def test_simulate_is_deterministic(seasonal_csv, tmp_path):
    other = str(tmp_path / "again.csv")
    main(["simulate", "--model", "seasonal", "--period", "4", "--init", "0.01,0.05,0.2",
          "--n", "120", "--seed", "3", "--out", other])
    assert open(other).read() == open(seasonal_csv).read()


def test_fit_from_truth(seasonal_csv, tmp_path):
    out = str(tmp_path / "fit.json")
    code = main(["fit", seasonal_csv, "--model", "seasonal", "--period", "4",
                 "--init", "0.01,0.05,0.2", "--out", out, "--no-timestamp"])
    assert code == 0
    rep = json.load(open(out))
    assert rep["schema_version"] == 1 and rep["command"] == "fit"
    assert "timestamp" not in rep
    assert rep["convergence"]["converged"] is True
    assert rep["p"] == 3 and rep["N"] == 120
    assert rep["model"]["label"] == "(2,1,0)"
    assert rep["neg_hessian"][0][0] == -rep["hessian"][0][0]
    # identities hold on the printed numbers
    assert rep["aic"] == float(f"{-2 * rep['loglik'] + 2 * rep['p']:.12g}")
    assert rep["gic"] == float(f"{-2 * rep['loglik'] + 2 * rep['b_gic']:.12g}")
    natural = rep["theta_hat"]["natural"]
    assert all(math.isclose(math.log(n), w, rel_tol=1e-9) for n, w in zip(natural, rep["theta_hat"]["working"]))


def test_fit_json_is_reproducible(seasonal_csv, tmp_path):
    outs = []
    for k in range(2):
        out = str(tmp_path / f"r{k}.json")
        main(["fit", seasonal_csv, "--model", "seasonal", "--period", "4", "--out", out, "--no-timestamp"])
        outs.append(open(out, "rb").read())
    assert outs[0] == outs[1]


def test_fit_timestamp_present(seasonal_csv, tmp_path):
    out = str(tmp_path / "ts.json")
    main(["fit", seasonal_csv, "--model", "seasonal", "--period", "4", "--out", out])
    assert "timestamp" in json.load(open(out))


def test_gradcheck_passes(seasonal_csv, tmp_path):
    out = str(tmp_path / "gc.json")
    code = main(["gradcheck", seasonal_csv, "--model", "seasonal", "--period", "4",
                 "--init", "0.02,0.03,0.3", "--out", out])
    rep = json.load(open(out))
    assert code == 0 and rep["passed"]
    assert rep["max_rel_error_gradient"] < 1e-4
    assert len(rep["gradient"]) == 3


def test_gradcheck_tolerance_failure(seasonal_csv, tmp_path):
    out = str(tmp_path / "gc.json")
    code = main(["gradcheck", seasonal_csv, "--model", "seasonal", "--period", "4",
                 "--init", "1e-4,1e-4,1e-4", "--tol", "1e-12", "--out", out])
    assert code == 1
    assert json.load(open(out))["passed"] is False


def test_seasonal_ar_report_has_roots(tmp_path):
    path = str(tmp_path / "ar.csv")
    assert main(["simulate", "--model", "seasonal-ar", "--period", "4", "--init", "0.01,0.02,0.2,0.1,0.6",
                 "--init-scale", "natural", "--n", "100", "--seed", "1", "--out", path]) == 0
    out = str(tmp_path / "ar.json")
    main(["fit", path, "--model", "seasonal-ar", "--period", "4", "--out", out, "--no-timestamp"])
    rep = json.load(open(out))
    assert len(rep["ar_root_moduli"]) == 1
    assert rep["model"]["label"] == "(2,1,1)"


def test_compare_small(seasonal_csv, tmp_path):
    out = str(tmp_path / "cmp.json")
    code = main(["compare", seasonal_csv, "--period", "4", "--candidates", "trend1,seasonal", "--out", out,
                 "--no-timestamp"])
    assert code == 0
    rep = json.load(open(out))
    assert [row["rank"] for row in rep["table"]] == [1, 2]
    assert rep["best"] == rep["table"][0]["model"]
    assert set(rep["fits"]) == {"(1,0,0)", "(2,1,0)"}


def test_config_errors_exit_2(tmp_path, seasonal_csv):
    assert main(["fit", str(tmp_path / "missing.csv")]) == 2
    assert main(["fit", seasonal_csv, "--init", "1,2,3"]) == 2
    assert main(["fit", seasonal_csv, "--init=-1,2"]) == 2
    assert main(["fit", seasonal_csv, "--model", "seasonal", "--period", "1"]) == 2
    assert main(["fit", write(tmp_path, "bad.csv", "1\nx\n")]) == 2
    assert main(["compare", seasonal_csv, "--candidates", "bogus"]) == 2
    with pytest.raises(SystemExit) as info:
        main(["fit"])
    assert info.value.code == 2


def test_numerical_failure_exit_3(tmp_path):
    # a constant series with no noise: the first innovation variance is zero
    path = write(tmp_path, "flat.csv", "1\n1\n1\n")
    assert main(["fit", path, "--init", "1e-300,1e-300", "--kappa", "1e-300"]) == 3
