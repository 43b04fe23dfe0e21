import json
import math
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mra.cli import main
from mra.manifest import ManifestError, parse_manifest, serialize_manifest

MANIFESTS = Path(__file__).resolve().parent.parent / "manifests"

MINIMAL = """
kind = "check"
[model]
mode = "stochastic"
"""


def keys_of(exc):
    return [e.key for e in exc.value.errors]


def test_minimal_manifest_gets_defaults():
    m = parse_manifest(MINIMAL)
    b = m.basis()
    assert b.L == pytest.approx(math.pi) and b.N == 8 and b.Q == 32
    assert m.get("time", "dt") == 0.01


def test_unknown_key_is_named():
    with pytest.raises(ManifestError) as exc:
        parse_manifest(MINIMAL + "[sigma]\nlipshitz = 0.3\n")
    assert keys_of(exc) == ["sigma.lipshitz"]
    assert "sigma.lipshitz" in str(exc.value)


def test_zero_step_is_out_of_range():
    with pytest.raises(ManifestError) as exc:
        parse_manifest(MINIMAL + "[time]\ndt = 0\n")
    assert keys_of(exc) == ["time.dt"]


@pytest.mark.parametrize(
    "extra,key",
    [
        ("[basis]\nN = 4\nQ = 7\n", "basis.Q"),
        ("[basis]\nN = 2.5\n", "basis.N"),
        ("[a]\npreset = \"saturating\"\nm = 1.0\n", "a.M"),
        ("[constants]\nalpha = 1.0\n", "constants.alpha"),
        ("[ensemble]\nseed = -1\n", "ensemble.seed"),
        ("[forcing]\nkind = \"constant\"\n", "forcing.modes"),
        ("[widgets]\nx = 1\n", "widgets"),
        ("[experiment]\nepsilon = 1.5\n", "experiment.epsilon"),
        ("[sigma]\npreset = 3\n", "sigma.preset"),
    ],
)
def test_field_errors(extra, key):
    with pytest.raises(ManifestError) as exc:
        parse_manifest(MINIMAL + extra)
    assert key in keys_of(exc)


def test_missing_mode_and_kind():
    with pytest.raises(ManifestError) as exc:
        parse_manifest("[basis]\nN = 3\n")
    assert {"kind", "model.mode"} <= set(keys_of(exc))


def test_noise_forbidden_without_stochastic_mode():
    with pytest.raises(ManifestError) as exc:
        parse_manifest('kind = "check"\n[model]\nmode = "deterministic"\n[sigma]\npreset = "affine"\nc = 0.1\n')
    assert keys_of(exc) == ["sigma.preset"]


def test_command_must_agree_with_kind():
    with pytest.raises(ManifestError):
        parse_manifest(MINIMAL, kind="decay")
    assert parse_manifest(MINIMAL.replace('kind = "check"', ""), kind="check").kind == "check"


@pytest.mark.parametrize("path", sorted(MANIFESTS.glob("*.toml")), ids=lambda p: p.stem)
def test_shipped_manifests_round_trip(path):
    m = parse_manifest(path.read_text())
    assert parse_manifest(serialize_manifest(m)) == m


@settings(max_examples=50, deadline=None)
@given(
    N=st.integers(1, 64),
    L=st.floats(1e-3, 1e3),
    dt=st.floats(1e-6, 1.0),
    c=st.floats(-10, 10),
    state=st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=1),
    seed=st.integers(0, 2**64 - 1),
)
def test_generated_manifests_round_trip(N, L, dt, c, state, seed):
    text = f"""
kind = "simulate"
[basis]
N = {N}
L = {L!r}
[model]
mode = "stochastic"
[sigma]
preset = "sine"
c = {c!r}
[time]
T = 2.0
dt = {dt!r}
[ensemble]
seed = {seed}
[family]
state = [{state[0]!r}]
"""
    m = parse_manifest(text)
    again = parse_manifest(serialize_manifest(m))
    assert again == m
    assert again.get("ensemble", "seed") == seed


def run_cli(name, tmp_path, *extra):
    out = tmp_path / name
    manifest = MANIFESTS / f"{name}.toml"
    kind = parse_manifest(manifest.read_text()).kind
    code = main([kind, "--manifest", str(manifest), "--out", str(out), *extra])
    return code, out


def test_failing_assumption_gives_exit_one(tmp_path):
    code, out = run_cli("check_fail", tmp_path)
    assert code == 1
    summary = json.loads((out / "summary.json").read_text())
    assert summary["verdict"] == "fail"
    assert summary["verdicts"]["dissipation_margin"]["status"] == "fail"
    assert (out / "results.csv").read_text().splitlines()[0] == "assumption,status,margin"


def test_passing_check_gives_exit_zero(tmp_path):
    code, out = run_cli("check_pass", tmp_path)
    assert code == 0
    assert json.loads((out / "summary.json").read_text())["constants"]["rate"] == 0.5


def test_decay_schema_and_byte_identical_reruns(tmp_path):
    code, out = run_cli("decay", tmp_path)
    assert code == 0
    first = (out / "results.csv").read_bytes()
    assert first.splitlines()[0] == b"t,mean_h_sq,ci_half_width,bound,margin"
    svg = (out / "plot.svg").read_bytes()
    code, out2 = run_cli("decay", tmp_path / "again")
    assert (out2 / "results.csv").read_bytes() == first
    assert (out2 / "plot.svg").read_bytes() == svg


def test_seed_override_changes_results(tmp_path):
    _, a = run_cli("decay", tmp_path / "a")
    _, b = run_cli("decay", tmp_path / "b", "--seed", "8")
    assert (a / "results.csv").read_bytes() != (b / "results.csv").read_bytes()
    assert json.loads((b / "summary.json").read_text())["manifest"]["ensemble"]["seed"] == 8


def test_entry_time_schema(tmp_path):
    code, out = run_cli("entry_time", tmp_path)
    assert code == 0
    lines = (out / "results.csv").read_text().splitlines()
    assert lines[0] == "s,mean_h_sq_at_t,radius,absorbed"
    assert [l.split(",")[0] for l in lines[1:]] == ["1", "2", "4", "8"]


def test_steady_and_absorb_pass(tmp_path):
    assert run_cli("steady", tmp_path)[0] == 0
    code, out = run_cli("absorb", tmp_path)
    assert code == 0
    assert (out / "results.csv").read_text().startswith("t,mean_h_sq,ci_half_width,bound,margin\n")


def test_configuration_errors_give_exit_two(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text(MINIMAL + "[sigma]\nlipshitz = 1\n")
    assert main(["check", "--manifest", str(bad)]) == 2
    assert "sigma.lipshitz" in capsys.readouterr().err
    assert main(["check", "--manifest", str(tmp_path / "missing.toml")]) == 2
    nonint = tmp_path / "nonint.toml"
    nonint.write_text(
        'kind = "absorb"\n[model]\nmode = "stochastic"\nrate = 0.5\n[forcing]\nkind = "exponential"\nnu = -1.0\nmodes = [1.0]\n'
        "[family]\nstate = [1.0]\n[time]\nT = 0.1\n"
    )
    assert main(["absorb", "--manifest", str(nonint), "--out", str(tmp_path / "o")]) == 2
    assert "IntegrabilityError" in capsys.readouterr().err


def test_blow_up_gives_exit_three(tmp_path):
    m = tmp_path / "boom.toml"
    m.write_text(
        'kind = "simulate"\n[basis]\nN = 1\n[model]\nmode = "deterministic"\n[f]\npreset = "linear"\nslope = 50.0\n'
        "[time]\nT = 10.0\n[family]\nstate = [1.0]\n"
    )
    assert main(["simulate", "--manifest", str(m), "--out", str(tmp_path / "o")]) == 3


def test_bad_seed_is_rejected(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["check", "--manifest", str(MANIFESTS / "check_pass.toml"), "--seed", "-3"])
    assert exc.value.code == 2
