import os
import shutil
from fractions import Fraction

import pytest

from bilapcert import cli
from bilapcert.builder import ProfileFormatError
from bilapcert.certificate import (
    Certificate,
    CertificateFormatError,
    format_check,
    parse_check,
    read_certificate,
    write_certificate,
)
from bilapcert.pipeline import ConfigError, RunConfig, certify_dimension
from bilapcert.verifier import CHECK_ORDER
from conftest import small_config

SMALL_ARGS = ["--dims", "13", "--intervals", "450", "--subdiv", "12", "--eps", "1/100000"]


def test_small_run_certifies(small_run):
    cfg, cert, w, psi = small_run
    assert cert.passed and cert.failure is None
    assert [c.name for c in cert.checks] == list(CHECK_ORDER)
    assert all(cert.structure.values())
    assert cert.enclosure.singular


def test_certificate_round_trip(small_run, tmp_path):
    cert = small_run[1]
    path = tmp_path / "c.cert"
    digest = write_certificate(cert, path)
    back = read_certificate(path)
    assert back.digest() == digest
    assert back.payload_lines() == cert.payload_lines()
    assert back.enclosure == cert.enclosure
    for c in cert.checks:
        assert parse_check(format_check(c)) == c


def test_certificate_tampering_detected(small_run, tmp_path):
    path = tmp_path / "c.cert"
    write_certificate(small_run[1], path)
    text = path.read_text()
    for old, new in (("check stability pass", "check stability fail"), ("lambda 12193/5", "lambda 12194/5")):
        path.write_text(text.replace(old, new, 1))
        with pytest.raises(CertificateFormatError):
            read_certificate(path)
    # metadata is outside the digest
    path.write_text(text.replace("meta workers 1", "meta workers 7"))
    assert read_certificate(path).workers == 7


def test_failed_certificate_carries_no_enclosure(small_run):
    cfg, cert, _, _ = small_run
    checks = list(cert.checks)
    bad = checks[3]
    checks[3] = type(bad)(bad.name, False, bad.sense, Fraction(1), bad.worst_location, (0, 0), bad.subdiv)
    with pytest.raises(ValueError):
        Certificate(cert.params, cert.w_digest, cert.psi_digest, checks, cert.beta0, cert.structure,
                    cert.enclosure)


def test_worker_count_does_not_change_digest(tmp_path):
    one = certify_dimension(13, small_config(tmp_path / "one", jobs=1))
    many = certify_dimension(13, small_config(tmp_path / "many", jobs=16))
    assert one.passed and one.digest() == many.digest()
    assert (tmp_path / "one" / "N13.cert").read_text().split("digest")[0] == \
        (tmp_path / "many" / "N13.cert").read_text().split("digest")[0]


def test_resume_skips_matching_certificate(small_run, tmp_path):
    out = tmp_path / "resume"
    shutil.copytree(small_run[0].out, out)
    cfg = small_config(out)
    cert_path = cfg.path(13, "cert")
    os.utime(cert_path, (1, 1))
    again = certify_dimension(13, cfg)
    assert os.stat(cert_path).st_mtime == 1
    assert again.digest() == small_run[1].digest()
    # a different subdivision is a different run
    changed = certify_dimension(13, small_config(out, subdiv=13))
    assert os.stat(cert_path).st_mtime != 1 and changed.params.m == 13


def test_corrupted_profile_blocks_certificate(small_run, tmp_path):
    out = tmp_path / "corrupt"
    shutil.copytree(small_run[0].out, out)
    (out / "N13.cert").unlink()
    prof = out / "N13_psi.profile"
    lines = prof.read_text().splitlines()
    lines[50] = lines[50].replace("1", "3", 1)
    prof.write_text("\n".join(lines) + "\n")
    with pytest.raises(ProfileFormatError):
        certify_dimension(13, small_config(out))
    assert cli.main(["certify", "--out", str(out)] + SMALL_ARGS) == 1
    assert not (out / "N13.cert").exists()


def test_run_config_validation(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig(dims=(12,), out=tmp_path)
    with pytest.raises(ConfigError):
        RunConfig(dims=(15,), out=tmp_path, fine=True)
    with pytest.raises(ConfigError):
        RunConfig(dims=(13, 14), out=tmp_path, overrides={"eps": Fraction(1)})
    with pytest.raises(ConfigError):
        RunConfig(dims=(13,), out=tmp_path, window=Fraction(1, 10))
    assert RunConfig(dims=(13,), out=tmp_path, fine=True).m == 1500


def test_parse_dims():
    assert cli.parse_dims("13") == (13,)
    assert cli.parse_dims("13..31") == tuple(range(13, 32))
    assert cli.parse_dims("13,14") == (13, 14)
    assert cli.parse_dims("13,15..17,13") == (13, 15, 16, 17)


def test_cli_solve_rejects_dimension_12(tmp_path, capsys):
    assert cli.main(["solve", "--dims", "12", "--out", str(tmp_path)]) == 2
    assert "outside" in capsys.readouterr().err


def test_cli_solve_writes_samples(tmp_path, capsys):
    assert cli.main(["solve", "--dims", "13", "--intervals", "450", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "N13_w.samples").exists()
    assert "lambda_hat = 2438.5" in capsys.readouterr().out


def test_cli_certify_exit_codes(tmp_path, capsys):
    good = tmp_path / "good"
    assert cli.main(["certify", "--out", str(good)] + SMALL_ARGS) == 0
    assert "certified" in capsys.readouterr().out
    assert cli.main(["verify", "--out", str(good)] + SMALL_ARGS) == 0
    bad = tmp_path / "bad"
    args = ["certify", "--out", str(bad), "--dims", "13", "--intervals", "450", "--subdiv", "12"]
    assert cli.main(args + ["--eps", "1/10000000000"]) == 1
    cert = read_certificate(bad / "N13.cert")
    assert not cert.passed and cert.enclosure is None
    assert "boundary" in cert.failure
    assert "failure" in (bad / "N13.cert").read_text()
    capsys.readouterr()
    assert cli.main(["report", str(good / "N13.cert"), str(bad / "N13.cert"),
                     "--csv", str(tmp_path / "u.csv"), "--points", "20"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0].split()[:3] == ["N", "lambda", "eps0"]
    assert len(out) == 3 and "certified" in out[1] and "failed" in out[2]
    rows = (tmp_path / "u.csv").read_text().splitlines()
    assert rows[0] == "N,r,u" and len(rows) == 1 + 2 * 21


def test_cli_gates(capsys):
    assert cli.main(["gates", "--range", "5..40"]) == 0
    rows = [line.split() for line in capsys.readouterr().out.splitlines()[1:]]
    assert [int(r[0]) for r in rows if r[3] == "True"] == list(range(13, 41))
    assert cli.main(["gates", "--range", "30..33"]) == 0
    rows = [line.split() for line in capsys.readouterr().out.splitlines()[1:]]
    assert [r[4] for r in rows] == ["False", "False", "True", "True"]
    assert cli.main(["gates", "--range", "13..13"]) == 0
    assert len(capsys.readouterr().out.splitlines()) == 2
    assert cli.main(["gates", "--range", "4..6"]) == 2


def test_cli_bounds_and_empty_report(tmp_path, capsys):
    assert cli.main(["bounds", "--out", str(tmp_path)]) == 0
    rows = capsys.readouterr().out.splitlines()
    assert len(rows) == 1 + 19 + 1 and all(r.split()[3] == "ok" for r in rows[1:20])
    assert cli.main(["report"]) == 0
    assert len(capsys.readouterr().out.splitlines()) == 1
    missing = tmp_path / "nope.cert"
    assert cli.main(["report", str(missing)]) == 1
