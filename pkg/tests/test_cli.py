from halcyon.cli import main

from conftest import SCENARIO_DIR


def _summary(text):
    return dict(l.split("=", 1) for l in text.splitlines() if "=" in l and not l.startswith("tick="))


def test_run_house_fire_quiet(capsys):
    assert main(["run", "house_fire.scn", "--quiet"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("-- summary --")
    assert not any(l.startswith("tick=") for l in out.splitlines())
    assert int(_summary(out)["delivered"]) >= 2


def test_trace_file_matches_stdout(tmp_path, capsys):
    dest = tmp_path / "t.trace"
    assert main(["run", str(SCENARIO_DIR / "collision.scn"), "--trace", str(dest)]) == 0
    assert dest.read_text() == capsys.readouterr().out


def test_recheck_delay_override(capsys):
    main(["run", "house_fire.scn", "--quiet", "--recheck-delay", "30"])
    # first free recheck is now at 131 as well (11 + 4 * 30)
    assert _summary(capsys.readouterr().out)["delivered"] == "3"


def test_validate_ok_and_broken(tmp_path, capsys):
    assert main(["validate", "secretary.scn"]) == 0
    bad = tmp_path / "bad.scn"
    bad.write_text("principal a\ndevice ghost d modality=visual priority=1\n")
    assert main(["validate", str(bad)]) == 1
    assert f"{bad}:2:" in capsys.readouterr().err


def test_usage_errors(capsys):
    assert main([]) == 2
    assert main(["run"]) == 2
    assert main(["run", "nowhere.scn"]) == 2
    assert main(["run", "house_fire.scn", "--recheck-delay", "0"]) == 2


def test_rules_check(tmp_path, capsys):
    assert main(["rules-check", "fire.rules"]) == 0
    assert "1 rule(s) ok" in capsys.readouterr().out
    bad = tmp_path / "bad.rules"
    bad.write_text("rule x: when => reply sender \"y\"\n")
    assert main(["rules-check", str(bad)]) == 1
    assert ":1:14:" in capsys.readouterr().err
