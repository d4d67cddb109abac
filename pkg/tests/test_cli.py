import json

import pytest
from click.testing import CliRunner

from ssiforge.cli import main
from ssiforge.credentials import did_from_public_key, generate_keypair
from ssiforge.pistar import export_dot, parse_model
from ssiforge.simulator import actor_key_seed

BND = "Birth Notification Document"


@pytest.fixture()
def runner():
    return CliRunner()


@pytest.fixture()
def fixture_doc(birth_path):
    return json.loads(birth_path.read_text(encoding="utf-8"))


def write_doc(tmp_path, doc, name="model.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc), encoding="utf-8")
    return str(path)


def rename_node(doc, node_id, text):
    for actor in doc["actors"]:
        for node in actor["nodes"]:
            if node["id"] == node_id:
                node["text"] = text
                return
    raise KeyError(node_id)


def ambiguous_doc(doc):
    rename_node(doc, "midwife-issue-bnd", "Arrange BND")
    return doc


def self_dep_doc(doc):
    # both ends inside Mother: depender equals dependee
    for dep in doc["dependencies"]:
        if dep["id"] == "dep-id-midwife":
            dep["target"] = "mother-obtain-bnd"
    return doc


def midwife_did(seed):
    return did_from_public_key(generate_keypair(actor_key_seed(seed, "Midwife")).public_key)


# -- validate -------------------------------------------------------------


def test_validate_clean_fixture(runner, birth_path):
    result = runner.invoke(main, ["validate", str(birth_path)])
    assert result.exit_code == 0
    assert result.output == "0 error(s), 0 warning(s)\n"


def test_validate_clean_fixture_json(runner, birth_path):
    result = runner.invoke(main, ["validate", str(birth_path), "--format", "json"])
    assert result.exit_code == 0
    assert json.loads(result.output) == {"errors": [], "warnings": []}


def test_validate_reports_errors(runner, tmp_path, fixture_doc):
    path = write_doc(tmp_path, self_dep_doc(fixture_doc))
    result = runner.invoke(main, ["validate", path])
    assert result.exit_code == 1
    assert "ERROR E_DEP_SELF dep-id-midwife:" in result.output
    assert "1 error(s), 0 warning(s)" in result.output

    result = runner.invoke(main, ["validate", path, "--format", "json"])
    assert result.exit_code == 1
    payload = json.loads(result.output)
    assert [e["code"] for e in payload["errors"]] == ["E_DEP_SELF"]
    assert payload["errors"][0]["subject"] == "dep-id-midwife"


def test_validate_bundled_broken_fixture(runner, birth_path):
    result = runner.invoke(main, ["validate", str(birth_path.parent / "bad_dep.json")])
    assert result.exit_code == 1
    assert "ERROR E_DEP_SELF dep-self:" in result.output


def test_validate_surfaces_parser_warnings(runner, tmp_path, fixture_doc):
    fixture_doc["colorScheme"] = "pastel"
    result = runner.invoke(main, ["validate", write_doc(tmp_path, fixture_doc)])
    assert result.exit_code == 0
    assert "WARN W_UNKNOWN_KEY /colorScheme:" in result.output
    assert "0 error(s), 1 warning(s)" in result.output


def test_unparseable_document_exits_two(runner, tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{nope", encoding="utf-8")
    result = runner.invoke(main, ["validate", str(path)])
    assert result.exit_code == 2
    assert "PARSE E_JSON" in result.stderr
    assert result.stdout == ""


def test_unreadable_path_exits_two(runner, tmp_path):
    result = runner.invoke(main, ["validate", str(tmp_path / "missing.json")])
    assert result.exit_code == 2
    assert "cannot read" in result.stderr


# -- roles ----------------------------------------------------------------


def test_roles_text_lists_roles_and_flows(runner, birth_path):
    result = runner.invoke(main, ["roles", str(birth_path)])
    assert result.exit_code == 0
    assert "  Midwife: Issuer of Birth Notification Document" in result.output
    assert "  Mother: Holder of Birth Certificate" in result.output
    assert (
        "  dep-bnd-mother: Issuance of Birth Notification Document from Midwife to Mother [Verb]"
        in result.output
    )
    assert "WARN" not in result.output


def test_roles_json(runner, birth_path):
    result = runner.invoke(main, ["roles", str(birth_path), "--format", "json"])
    assert result.exit_code == 0
    payload = json.loads(result.output)
    assert {"actor": "Midwife", "credentialType": BND, "role": "Issuer"} in payload["roles"]
    flow = next(f for f in payload["flows"] if f["dependency"] == "dep-bnd-mother")
    assert flow == {
        "credentialType": BND,
        "dependency": "dep-bnd-mother",
        "evidence": {"element": "midwife-issue-bnd", "kind": "Verb"},
        "from": "Midwife",
        "kind": "Issuance",
        "to": "Mother",
    }
    assert payload["warnings"] == []


def test_roles_strict_flag(runner, tmp_path, birth_path, fixture_doc):
    ambiguous = write_doc(tmp_path, ambiguous_doc(fixture_doc))
    assert runner.invoke(main, ["roles", str(birth_path), "--strict"]).exit_code == 0
    assert runner.invoke(main, ["roles", ambiguous]).exit_code == 0
    result = runner.invoke(main, ["roles", ambiguous, "--strict"])
    assert result.exit_code == 1
    assert "WARN W_FLOW_AMBIGUOUS dep-bnd-mother:" in result.output


def test_roles_custom_lexicon(runner, tmp_path, fixture_doc):
    rename_node(fixture_doc, "midwife-issue-bnd", "Draw Up BND")
    model_path = write_doc(tmp_path, fixture_doc)
    lexicon_path = tmp_path / "lexicon.json"
    lexicon_path.write_text(json.dumps({"issueVerbs": ["issue", "draw up"]}), encoding="utf-8")

    plain = runner.invoke(main, ["roles", model_path, "--strict"])
    assert plain.exit_code == 1
    custom = runner.invoke(main, ["roles", model_path, "--strict", "--lexicon", str(lexicon_path)])
    assert custom.exit_code == 0
    assert "  Midwife: Issuer of Birth Notification Document" in custom.output


def test_bad_lexicon_file_exits_two(runner, birth_path, tmp_path):
    bad = tmp_path / "lexicon.json"
    bad.write_text('{"issueVerbs": ["check"]}', encoding="utf-8")  # collides with check verbs
    result = runner.invoke(main, ["roles", str(birth_path), "--lexicon", str(bad)])
    assert result.exit_code == 2
    assert "bad lexicon file" in result.stderr


# -- simulate -------------------------------------------------------------


def test_simulate_happy_path(runner, birth_path):
    result = runner.invoke(main, ["simulate", str(birth_path), "--seed", "42"])
    assert result.exit_code == 0
    assert "Root goals:" in result.output
    assert "  Mother: Get Birth Certificate for new baby: Satisfied" in result.output
    assert "  Midwife: Issue Valid BNDs: Satisfied" in result.output
    assert "  integrity: 3 pass, 0 fail" in result.output
    assert "  issuerTrusted: 3 pass, 0 fail" in result.output
    assert "Termination: quiescence at tick 11" in result.output


def test_simulate_trace_is_reproducible(runner, birth_path, tmp_path):
    first = tmp_path / "a.jsonl"
    second = tmp_path / "b.jsonl"
    for target in (first, second):
        result = runner.invoke(main, ["simulate", str(birth_path), "--seed", "42", "--trace", str(target)])
        assert result.exit_code == 0
    assert first.read_bytes() == second.read_bytes()
    head = json.loads(first.read_text(encoding="utf-8").splitlines()[0])
    assert head["config"]["seed"] == 42


def test_simulate_writes_dot(runner, birth_path, tmp_path):
    dot = tmp_path / "model.dot"
    result = runner.invoke(main, ["simulate", str(birth_path), "--seed", "42", "--dot", str(dot)])
    assert result.exit_code == 0
    text = dot.read_text(encoding="utf-8")
    assert text.startswith("digraph")
    assert "dep-bnd-mother" in text


def test_simulate_trust_removal_denies(runner, birth_path, tmp_path):
    trust = tmp_path / "trust.json"
    trust.write_text(
        json.dumps(
            [
                {
                    "verifier": "Registrar",
                    "credentialType": BND,
                    "issuerDid": midwife_did(42),
                    "action": "remove",
                }
            ]
        ),
        encoding="utf-8",
    )
    result = runner.invoke(main, ["simulate", str(birth_path), "--seed", "42", "--trust", str(trust)])
    assert result.exit_code == 1
    assert "  Mother: Get Birth Certificate for new baby: Denied" in result.output
    assert "  issuerTrusted: 2 pass, 1 fail" in result.output
    assert "  integrity: 3 pass, 0 fail" in result.output


def test_simulate_trust_addition_is_accepted(runner, birth_path, tmp_path):
    trust = tmp_path / "trust.json"
    trust.write_text(
        json.dumps([{"verifier": "Registrar", "credentialType": BND, "issuerDid": "did:sim:ext"}]),
        encoding="utf-8",
    )
    result = runner.invoke(main, ["simulate", str(birth_path), "--seed", "42", "--trust", str(trust)])
    assert result.exit_code == 0


def test_simulate_malformed_trust_file_exits_two(runner, birth_path, tmp_path):
    trust = tmp_path / "trust.json"
    trust.write_text('{"not": "a list"}', encoding="utf-8")
    result = runner.invoke(main, ["simulate", str(birth_path), "--trust", str(trust)])
    assert result.exit_code == 2
    assert "bad trust file" in result.stderr


def test_simulate_unknown_trust_pair_exits_one(runner, birth_path, tmp_path):
    trust = tmp_path / "trust.json"
    trust.write_text(
        json.dumps([{"verifier": "Mother", "credentialType": "Birth Certificate", "issuerDid": "did:sim:x"}]),
        encoding="utf-8",
    )
    result = runner.invoke(main, ["simulate", str(birth_path), "--trust", str(trust)])
    assert result.exit_code == 1
    assert result.stderr.startswith("E_TRUST_NOT_VERIFIER:")


def test_simulate_rejects_invalid_model(runner, tmp_path, fixture_doc):
    path = write_doc(tmp_path, self_dep_doc(fixture_doc))
    result = runner.invoke(main, ["simulate", path])
    assert result.exit_code == 1
    assert "ERROR E_DEP_SELF dep-id-midwife:" in result.stderr


def test_simulate_stops_on_ambiguous_flows(runner, tmp_path, fixture_doc):
    path = write_doc(tmp_path, ambiguous_doc(fixture_doc))
    result = runner.invoke(main, ["simulate", path, "--seed", "42"])
    assert result.exit_code == 1
    assert "WARN W_FLOW_AMBIGUOUS dep-bnd-mother:" in result.stderr
    assert "--allow-ambiguous" in result.stderr

    forced = runner.invoke(main, ["simulate", path, "--seed", "42", "--allow-ambiguous"])
    # the defaulted presentation has no matching verifier, so compilation fails
    assert forced.exit_code == 1
    assert forced.stderr.startswith("E_COMPILE_ROLE:")


def test_simulate_drop_flag(runner, birth_path):
    result = runner.invoke(main, ["simulate", str(birth_path), "--seed", "42", "--drop", "1.0"])
    assert result.exit_code == 1
    assert "  Mother: Get Birth Certificate for new baby: Denied" in result.output
    assert "  integrity: 0 pass, 0 fail" in result.output
    assert "Termination: quiescence at tick 40" in result.output


# -- export ---------------------------------------------------------------


def test_export_sd_to_stdout(runner, birth_path):
    result = runner.invoke(main, ["export", str(birth_path), "--view", "sd"])
    assert result.exit_code == 0
    parsed = parse_model(birth_path.read_bytes())
    assert result.output == export_dot(parsed.model, "sd")


def test_export_sr_to_file(runner, birth_path, tmp_path):
    out = tmp_path / "model.dot"
    result = runner.invoke(main, ["export", str(birth_path), "--view", "sr", "--out", str(out)])
    assert result.exit_code == 0
    assert result.output == ""
    parsed = parse_model(birth_path.read_bytes())
    assert out.read_text(encoding="utf-8") == export_dot(parsed.model, "sr")


def test_export_requires_known_view(runner, birth_path):
    assert runner.invoke(main, ["export", str(birth_path), "--view", "3d"]).exit_code == 2
    assert runner.invoke(main, ["export", str(birth_path)]).exit_code == 2


# -- presentation ---------------------------------------------------------


def test_color_toggle(runner, birth_path):
    colored = runner.invoke(main, ["simulate", str(birth_path), "--seed", "42"], color=True)
    assert "\x1b[" in colored.output
    plain = runner.invoke(
        main,
        ["simulate", str(birth_path), "--seed", "42"],
        color=True,
        env={"SSIFORGE_NO_COLOR": "1"},
    )
    assert "\x1b[" not in plain.output
    assert plain.exit_code == 0


def test_version_flag(runner):
    result = runner.invoke(main, ["--version"])
    assert result.exit_code == 0
    assert "ssiforge, version 0.1.0" in result.output
