import json
from pathlib import Path

import pytest

from ectaks.algebra import INF, Curve, scalar_mul
from ectaks.cli import main

GOLDEN = Path(__file__).parent / "golden"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def net(tmp_path, capsys):
    out = tmp_path / "net"
    code, _, _ = run(capsys, "provision", "--topology", GOLDEN / "triangle.json", "--curve", "toy11",
                     "--seed", 1, "--out", out)
    assert code == 0
    return out


def test_provision_matches_golden(net):
    for f in sorted((GOLDEN / "triangle_toy11").iterdir()):
        assert (net / f.name).read_bytes() == f.read_bytes(), f.name


def test_golden_files_are_consistent():
    d = GOLDEN / "triangle_toy11"
    curve = Curve.load(d / "curve.json")
    state = json.loads((d / "ca_state.json").read_text())
    p = curve.p
    lcds = {int(i): json.loads((d / f"lcd_{i}.json").read_text()) for i in (1, 2, 3)}
    assert {i: sorted(l["public"]) for i, l in lcds.items()} == {1: ["2", "3"], 2: ["1", "3"], 3: ["1", "2"]}
    for key, m in state["ca_secrets"].items():
        i, j = key.split("-")
        m = [int(x) for x in m]
        pub = [INF if P == "inf" else (int(P["x"]), int(P["y"])) for P in lcds[int(i)]["public"][j]]
        assert pub == [scalar_mul(curve, x, curve.G) for x in m]
        ki = [int(x) for x in lcds[int(i)]["k"]]
        kj = [int(x) for x in lcds[int(j)]["k"]]
        ti = [int(x) for x in lcds[int(i)]["t"]]
        assert (ki[0] * m[0] + ki[1] * m[1]) % p == (kj[0] * ti[0] + kj[1] * ti[1]) % p != 0


def test_provision_deterministic(tmp_path, capsys, net):
    again = tmp_path / "again"
    run(capsys, "provision", "--topology", GOLDEN / "triangle.json", "--curve", "toy11", "--seed", 1, "--out", again)
    for f in net.iterdir():
        assert (again / f.name).read_bytes() == f.read_bytes()


def test_seed_from_environment(tmp_path, capsys, monkeypatch, net):
    monkeypatch.setenv("ECTAKS_SEED", "1")
    env = tmp_path / "env"
    run(capsys, "provision", "--topology", GOLDEN / "triangle.json", "--curve", "toy11", "--out", env)
    assert (env / "lcd_1.json").read_bytes() == (net / "lcd_1.json").read_bytes()
    # the flag wins over the environment
    flag = tmp_path / "flag"
    run(capsys, "provision", "--topology", GOLDEN / "triangle.json", "--curve", "toy11", "--seed", 2, "--out", flag)
    assert (flag / "lcd_1.json").read_bytes() != (net / "lcd_1.json").read_bytes()


@pytest.mark.parametrize("topology, rule", [
    ({"n": 2, "arrows": [[1, 2]]}, "AsymmetricArrow"),
    ({"n": 2, "edges": [[1, 1]]}, "SelfLoop"),
    ({"n": 2, "edges": [[1, 5]]}, "IdOutOfRange"),
])
def test_invalid_topology(tmp_path, capsys, topology, rule):
    path = tmp_path / "t.json"
    path.write_text(json.dumps(topology))
    code, _, err = run(capsys, "provision", "--topology", path, "--curve", "toy11", "--out", tmp_path / "o")
    assert code == 2 and rule in err


def test_order_bound_flag(tmp_path, capsys):
    code, _, err = run(capsys, "provision", "--topology", GOLDEN / "triangle.json", "--curve", "toy3",
                       "--out", tmp_path / "o")
    assert code == 2 and "ParameterMismatch" in err
    code, _, _ = run(capsys, "provision", "--topology", GOLDEN / "triangle.json", "--curve", "toy3",
                     "--allow-small-p", "--out", tmp_path / "o")
    assert code == 0


def test_handshake_sweep_and_pair(capsys, net):
    code, out, _ = run(capsys, "handshake", "--state", net / "ca_state.json", "--rounds", 3)
    rec = json.loads(out)
    assert code == 0 and rec["status"] == "agree" and rec["agree"] == rec["arrows"] == 6
    code, out, _ = run(capsys, "handshake", "--lcd", net / "lcd_2.json", "--peer", net / "lcd_3.json",
                       "--curve", net / "curve.json")
    assert code == 0 and json.loads(out)["status"] == "agree"


def test_handshake_mismatched_lcd(tmp_path, capsys, net):
    other = tmp_path / "other"
    run(capsys, "provision", "--topology", GOLDEN / "triangle.json", "--curve", "toy11", "--seed", 99, "--out", other)
    code, out, _ = run(capsys, "handshake", "--lcd", net / "lcd_1.json", "--peer", other / "lcd_2.json",
                       "--curve", "toy11")
    assert code == 3 and json.loads(out)["status"] == "disagree"


def test_seal_open_roundtrip(tmp_path, capsys, net):
    msg = tmp_path / "m.bin"
    code, _, _ = run(capsys, "seal", "--lcd", net / "lcd_1.json", "--curve", "toy11", "--to", 2,
                     "--message", "hello there", "--out", msg)
    assert code == 0
    plain = tmp_path / "plain"
    code, out, _ = run(capsys, "open", "--lcd", net / "lcd_2.json", "--curve", "toy11", "--in", msg,
                       "--out", plain)
    rec = json.loads(out)
    assert code == 0 and rec["status"] == "accept" and rec["sender"] == 1
    assert plain.read_bytes() == b"hello there"


def test_open_with_wrong_lcd_rejects(tmp_path, capsys, net):
    msg = tmp_path / "m.bin"
    run(capsys, "seal", "--lcd", net / "lcd_1.json", "--curve", "toy11", "--to", 2, "--message", "x", "--out", msg)
    code, out, _ = run(capsys, "open", "--lcd", net / "lcd_3.json", "--curve", "toy11", "--in", msg)
    assert code == 3 and json.loads(out)["status"] == "reject"
    bad = bytearray(msg.read_bytes())
    bad[-1] ^= 1
    msg.write_bytes(bytes(bad))
    code, out, _ = run(capsys, "open", "--lcd", net / "lcd_2.json", "--curve", "toy11", "--in", msg)
    assert code == 3


def test_seal_from_file_and_broadcast(tmp_path, capsys):
    topo = tmp_path / "star.json"
    topo.write_text(json.dumps({"n": 4, "edges": [[1, 2], [1, 3], [1, 4]]}))
    out = tmp_path / "net"
    code, _, _ = run(capsys, "provision", "--topology", topo, "--curve", "mid1009", "--cluster", "1:2,3,4",
                     "--out", out)
    assert code == 0
    body = tmp_path / "body"
    body.write_bytes(b"\x00\xffbinary")
    msg = tmp_path / "b.bin"
    code, _, _ = run(capsys, "seal", "--lcd", out / "lcd_1.json", "--curve", "mid1009", "--members", "2,3,4",
                     "--in", body, "--out", msg)
    assert code == 0
    for j in (2, 3, 4):
        code, out_, _ = run(capsys, "open", "--lcd", out / f"lcd_{j}.json", "--curve", "mid1009", "--in", msg)
        assert code == 0 and json.loads(out_)["bytes"] == 8


def test_replace_and_admit(tmp_path, capsys, net):
    rep = tmp_path / "rep"
    code, out, _ = run(capsys, "replace", "--state", net / "ca_state.json", "--node", 2, "--out", rep)
    rec = json.loads(out)
    assert code == 0 and rec["neighbors_agree"] and rec["replacements"] == 1
    for i in (1, 2, 3):
        assert (rep / f"lcd_{i}.json").read_bytes() == (net / f"lcd_{i}.json").read_bytes()
    adm = tmp_path / "adm"
    code, out, _ = run(capsys, "admit", "--state", net / "ca_state.json", "--node", 4, "--neighbors", "2,3",
                       "--seed", 5, "--out", adm)
    assert code == 0 and json.loads(out)["neighbors"] == [2, 3]
    assert (adm / "lcd_1.json").read_bytes() == (net / "lcd_1.json").read_bytes()
    code, out, _ = run(capsys, "handshake", "--state", adm / "ca_state.json")
    assert code == 0
    code, _, err = run(capsys, "admit", "--state", adm / "ca_state.json", "--node", 4, "--neighbors", "1",
                       "--out", adm)
    assert code == 2 and "IdCollision" in err


def test_cluster_form(tmp_path, capsys, net):
    code, _, err = run(capsys, "cluster", "form", "--state", net / "ca_state.json", "--master", 1,
                       "--members", "2,3", "--out", tmp_path / "c")
    k = json.loads((net / "ca_state.json").read_text())
    # edges 1-2 and 1-3 were provisioned with different products
    assert code == 4 and "ClusterConflict" in err
    assert not (tmp_path / "c").exists()
    code, out, _ = run(capsys, "cluster", "form", "--state", net / "ca_state.json", "--master", 1,
                       "--members", "2", "--out", tmp_path / "c1")
    assert code == 0 and json.loads(out)["members"] == [2]
    assert k["sensitive"] is True


def test_attack_recover(tmp_path, capsys, net):
    out = tmp_path / "atk"
    code, stdout, _ = run(capsys, "attack", "recover", "--state", net / "ca_state.json", "--target", 1,
                          "--compromised", "2,3", "--out", out)
    rec = json.loads(stdout)
    assert code == 0 and rec["outcome"] in ("Unique", "Ambiguous") and rec["truth_in_space"]
    report = json.loads((out / "recover.json").read_text())
    assert report["oracle"] == "bruteforce" and report["compromised"] == [2, 3]
    code, stdout, _ = run(capsys, "attack", "recover", "--state", net / "ca_state.json",
                          "--compromised", "2", "--out", tmp_path / "one")
    assert code == 0 and json.loads(stdout)["outcome"] == "Ambiguous"


def test_attack_estimate_sp_with_census(tmp_path, capsys):
    out = tmp_path / "sp"
    code, stdout, _ = run(capsys, "attack", "estimate-sp", "--p", 2, 11, "--trials", 2000, "--seed", 1,
                          "--out", out)
    rec = json.loads(stdout)
    assert code == 0 and rec["cross_check"]["agrees"]
    report = json.loads((out / "sp.json").read_text())
    assert report["census"]["closed_form_matches"]
    assert {f.name for f in out.iterdir()} == {"sp.json", "sp.csv", "ranks.csv", "sp.png", "ranks.png"}
    assert (out / "sp.png").read_bytes()[:4] == b"\x89PNG"
    lines = (out / "sp.csv").read_text().splitlines()
    assert lines[0].startswith("p,trials") and len(lines) == 3


def test_attack_trials(tmp_path, capsys):
    code, out, _ = run(capsys, "attack", "trials", "--curve", "toy11", "--trials", 50, "--out", tmp_path / "t")
    assert code == 0 and json.loads(out)["trials"] == 50
    code, out, _ = run(capsys, "attack", "trials", "--curve", "toy3", "--kind", "impersonate",
                       "--trials", 20, "--witnesses", 2, "--out", tmp_path / "i")
    assert code == 0 and json.loads(out)["solution_space_size"] == 9


def test_curve_search(tmp_path, capsys):
    code, out, _ = run(capsys, "curve", "search", "--max-q", 3, "--out", tmp_path / "none")
    assert code == 0 and json.loads(out)["count"] == 0
    code, out, _ = run(capsys, "curve", "search", "--max-q", 1100, "--min-p", 1009, "--out", tmp_path / "c")
    rec = json.loads(out)
    assert code == 0 and rec["count"] >= 1 and rec["max_p"] >= 1009
    for entry in json.loads((tmp_path / "c" / "index.json").read_text()):
        c = Curve.load(tmp_path / "c" / entry["file"])
        assert c.p == entry["p"] >= 1009


def test_missing_file(tmp_path, capsys):
    code, _, err = run(capsys, "attack", "recover", "--state", tmp_path / "nope.json", "--out", tmp_path)
    assert code == 2 and "error" in err
