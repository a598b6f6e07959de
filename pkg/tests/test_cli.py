import json
import subprocess
import sys

import pytest

from irstrack.cli import (
    EXIT_CONVERGENCE,
    EXIT_IO,
    EXIT_OK,
    EXIT_VALIDATION,
    ConfigError,
    config_hash,
    load_config,
    main,
    parse_sweep,
)
from irstrack.codebook import load_shape, quadratic_profile
from irstrack.sim import RunConfig

SMALL_INI = """\
[arrays]
Q = 8
bs_rows = 4
bs_cols = 2

[codebook]
M = 9
ide_codebook = quadratic

[estimation]
H = 6
est_trials = 20

[campaign]
trajectories = 2
seeds = 1
sample_every = 200
ptx_dbm = -10, 10
"""


@pytest.fixture
def small(tmp_path):
    path = tmp_path / "small.ini"
    path.write_text(SMALL_INI)
    return path


def write(tmp_path, text, name="cfg.ini"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_empty_file_gives_defaults(tmp_path):
    assert load_config(write(tmp_path, ""), env={}) == RunConfig()
    assert load_config(None, env={}) == RunConfig()


def test_top_level_override_merges(tmp_path):
    cfg = load_config(write(tmp_path, "M = 40\nQ = 16\n"), env={})
    assert cfg.M == 40 and cfg.Q == 16
    assert cfg.T == RunConfig().T


def test_section_and_tuple_values(tmp_path):
    cfg = load_config(write(tmp_path, "[campaign]\nptx_dbm = 0, 5\nschemes = proposed, perfect\n[channel]\nnoiseless = true\n"),
                      env={})
    assert cfg.ptx_dbm == (0.0, 5.0)
    assert cfg.schemes == ("proposed", "perfect")
    assert cfg.noiseless is True


@pytest.mark.parametrize("text,match", [
    ("spacing = 0\n", "spacing_wl must be positive"),
    ("[arrays]\nQ = 0\n", "Q must be >= 1"),
    ("bogus = 1\n", "1: unknown key 'bogus'"),
    ("[arrays]\nQ = 4\nQ = 5\n", "3: key 'Q' given twice"),
    ("[arrays]\nQ = 4\n[codebook]\nQ = 5\n", "given twice"),
    ("[nowhere]\nQ = 4\n", "unknown section"),
    ("Q = four\n", "Q"),
    ("this line has no separator\n", "1: cannot parse"),
])
def test_config_errors(tmp_path, text, match):
    with pytest.raises(ConfigError, match=match):
        load_config(write(tmp_path, text), env={})


def test_env_override(tmp_path):
    path = write(tmp_path, "M = 20\n")
    cfg = load_config(path, env={"IRSTRACK_M": "30", "IRSTRACK_SPACING": "0.25", "HOME": "/x"})
    assert cfg.M == 30 and cfg.spacing_wl == 0.25
    with pytest.raises(ConfigError):
        load_config(path, env={"IRSTRACK_NOPE": "1"})
    with pytest.raises(ConfigError):
        load_config(path, env={"IRSTRACK_M": "-3"})


def test_parse_sweep():
    assert parse_sweep("-10:30:10") == (-10.0, 0.0, 10.0, 20.0, 30.0)
    assert parse_sweep("1, 2.5") == (1.0, 2.5)
    for bad in ("0:10:0", "10:0:1", "a,b"):
        with pytest.raises(ConfigError):
            parse_sweep(bad)


def test_config_hash_tracks_values():
    assert config_hash(RunConfig()) == config_hash(RunConfig())
    assert config_hash(RunConfig()) != config_hash(RunConfig(M=30))


def read_csv(path):
    lines = path.read_text().splitlines()
    meta = [l for l in lines if l.startswith("#")]
    body = [l for l in lines if not l.startswith("#")]
    return meta, body


def test_campaign_outputs_and_manifest(small, tmp_path):
    out = tmp_path / "out"
    assert main(["campaign", "--config", str(small), "--out", str(out), "--threads", "1", "--seed", "5",
                 "--beam-patterns"]) == EXIT_OK
    meta, body = read_csv(out / "campaign.csv")
    assert meta[0] == "# irstrack 0.1.0" and meta[1] == "# command campaign"
    assert meta[2].startswith("# config_sha256 ") and meta[3] == "# seed 5"
    assert body[0] == "scheme,ptx_dbm,mean_snr_db,mean_rate,loss_prob,trials"
    assert len(body) == 1 + 4 * 2
    _, series = read_csv(out / "prediction_error.csv")
    assert series[0] == "time_s,pred_err,scheme"
    summary = json.loads((out / "campaign_summary.json").read_text())
    assert summary["seed"] == 5 and summary["config"]["M"] == 9
    for kind in ("quadratic", "optimized"):
        _, rows = read_csv(out / f"beam_pattern_{kind}.csv")
        assert rows[0] == "theta_deg,amplitude"


def test_campaign_reruns_are_byte_identical(small, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["campaign", "--config", str(small), "--out", str(a), "--threads", "1"]) == EXIT_OK
    assert main(["campaign", "--config", str(small), "--out", str(b), "--threads", "2"]) == EXIT_OK
    for name in ("campaign.csv", "prediction_error.csv", "campaign_summary.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_scheme_filter_and_sweep(small, tmp_path):
    out = tmp_path / "o"
    assert main(["campaign", "--config", str(small), "--out", str(out), "--threads", "1",
                 "--scheme", "perfect,focusing", "--ptx-sweep", "0:20:10"]) == EXIT_OK
    _, body = read_csv(out / "campaign.csv")
    schemes = {line.split(",")[0] for line in body[1:]}
    powers = sorted({float(line.split(",")[1]) for line in body[1:]})
    assert schemes == {"perfect", "focusing"} and powers == [0.0, 10.0, 20.0]
    assert main(["campaign", "--config", str(small), "--out", str(out), "--scheme", "oracle"]) == EXIT_VALIDATION


def test_design_codebook_exit_codes(small, tmp_path):
    out = tmp_path / "d"
    assert main(["design-codebook", "--config", str(small), "--out", str(out)]) == EXIT_OK
    report = json.loads((out / "design_report.json").read_text())
    assert report["converged"] and report["last_step_norm"] < report["stop_tol"]
    shape, meta = load_shape(out / "shape.txt")
    assert len(shape) == 8 and meta["kind"] == "optimized"

    capped = write(tmp_path, SMALL_INI + "[beamopt]\ndesign_max_iter = 2\n", "capped.ini")
    assert main(["design-codebook", "--config", str(capped), "--out", str(out)]) == EXIT_CONVERGENCE
    assert json.loads((out / "design_report.json").read_text())["stop_reason"] == "max_iterations"


def test_design_codebook_zero_snr_returns_initializer(small, tmp_path):
    zero = write(tmp_path, SMALL_INI + "[beamopt]\ndesign_snr = 0\n", "zero.ini")
    out = tmp_path / "z"
    assert main(["design-codebook", "--config", str(zero), "--out", str(out)]) == EXIT_OK
    shape, _ = load_shape(out / "shape.txt")
    assert list(shape.phases) == list(quadratic_profile(8, 9, 0.5, 1.0).phases)
    assert json.loads((out / "design_report.json").read_text())["iterations"] == 0


def test_estimate_and_track_commands(small, tmp_path):
    out = tmp_path / "e"
    assert main(["estimate", "--config", str(small), "--out", str(out)]) == EXIT_OK
    _, body = read_csv(out / "estimation_mse.csv")
    assert body[0] == "codebook,estimator,msnr_db,mse,trials"
    assert len(body) == 1 + 5 * 4
    assert main(["track", "--config", str(small), "--out", str(out), "--scheme", "proposed"]) == EXIT_OK
    _, body = read_csv(out / "track_metrics.csv")
    assert body[0].startswith("scheme,ptx_dbm,time_s,snr,rate,pred_err")


def test_error_exit_codes(tmp_path):
    bad = write(tmp_path, "spacing = 0\n")
    assert main(["beam-pattern", "--config", str(bad), "--out", str(tmp_path)]) == EXIT_VALIDATION
    assert main(["beam-pattern", "--config", str(tmp_path / "missing.ini")]) == EXIT_IO
    blocker = write(tmp_path, "", "file")
    small = write(tmp_path, SMALL_INI, "s.ini")
    assert main(["beam-pattern", "--config", str(small), "--out", str(blocker / "sub")]) == EXIT_IO
    assert main(["beam-pattern", "--config", str(small), "--out", str(tmp_path), "--threads", "0"]) == EXIT_VALIDATION


def test_console_script_entry_point(small, tmp_path):
    proc = subprocess.run([sys.executable, "-m", "irstrack.cli", "beam-pattern", "--config", str(small),
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "beam_pattern_quadratic.csv").exists()
