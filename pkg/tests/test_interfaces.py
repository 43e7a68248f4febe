import asyncio
import io
import json

import pytest
from fastapi.testclient import TestClient

from pwe import cli
from pwe.channel import compute_pdp, pdp_csv
from pwe.csvio import read_table
from pwe.scenario import build_scenario_graph, channel_params, parse_scenario_text
from pwe.service import PdpRequest, PdpService, create_app, request_stream, response_csv, serve_pipe, \
    start_stream_server

TOY = {
    "floorplan": {"hall": {"outline_m": [[0, 0], [4, 0], [4, 3], [0, 3]], "ceilings_m": [[0, 0, 4, 3]]}},
    "users": [
        {"user_id": "ap", "position_m": [3.5, 2.5, 2.5]},
        {"user_id": "sta", "position_m": [0.5, 0.5, 1.0],
         "trajectory": {"waypoints_m": [[0.5, 0.5, 1.0], [3.0, 0.5, 1.0]], "speed_mps": 1.0}},
    ],
    "channel": {"max_bounces": 3},
    "objectives": [{"tx_id": "ap", "rx_id": "sta"}],
    "simulation": {"duration_s": 1.0},
    "schedule": {
        "nodes": ["s", "d", "t0", "t1", "t2", "t3"],
        "edges": [["s", "t0"], ["t0", "t1"], ["t1", "d"], ["s", "t2"], ["t2", "t3"], ["t3", "d"]],
        "endpoints": ["s", "d"],
        "pairs_per_round": [[["s", "d"]]],
        "initial_routes": [{"tx_id": "s", "rx_id": "d", "nodes": ["s", "t2", "t3", "d"]}],
    },
}


@pytest.fixture(scope="module")
def scenario():
    return parse_scenario_text(json.dumps(TOY))


@pytest.fixture(scope="module")
def service(scenario):
    return PdpService(build_scenario_graph(scenario), None, channel_params(scenario))


@pytest.fixture
def toy_file(tmp_path):
    p = tmp_path / "toy.json"
    p.write_text(json.dumps(TOY))
    return str(p)


# ---------------------------------------------------------------- service core

def test_response_csv_equals_library(service, scenario):
    resp = service.handle(PdpRequest(tx_id="ap", rx_id="sta", rx_position=(1.0, 1.0, 1.0)))
    g = service.graph.with_user_at("sta", (1.0, 1.0, 1.0))
    assert resp.status == "ok"
    assert response_csv(resp) == pdp_csv(compute_pdp(g, None, "ap", "sta", channel_params(scenario)))


def test_statuses(service):
    assert service.handle(PdpRequest(tx_id="ap", rx_id="ghost")).status == "unknown_user"
    assert service.handle(PdpRequest(tx_id="ap", rx_id="ap")).status == "unknown_user"
    bad = service.handle(PdpRequest(tx_id="ap", rx_id="sta", overrides={"no-such-tile": "off"}))
    assert bad.status == "invalid_config"


def test_malformed_line_keeps_request_id(service):
    out = json.loads(service.handle_line('{"tx_id": "ap", "request_id": "r7", "bogus": 1}'))
    assert out["status"] == "invalid_config"
    assert out["request_id"] == "r7"


def test_stdio_pipe(service):
    lines = [json.dumps({"tx_id": "ap", "rx_id": "sta", "request_id": str(i)}) for i in range(3)]
    buf = io.StringIO()
    assert serve_pipe(service, io.StringIO("\n".join(lines) + "\n\n"), buf) == 3
    replies = [json.loads(x) for x in buf.getvalue().splitlines()]
    assert [r["request_id"] for r in replies] == ["0", "1", "2"]


def test_http_app(service):
    client = TestClient(create_app(service))
    health = client.get("/health").json()
    assert health["status"] == "ok" and health["users"] == ["ap", "sta"]
    r = client.post("/pdp", json={"tx_id": "ap", "rx_id": "sta"})
    assert r.status_code == 200
    assert r.json()["entries"]
    assert client.post("/pdp", json={"tx_id": "ap"}).status_code == 422


def test_tcp_stream(service):
    async def go():
        server = await start_stream_server(service)
        host, port = server.sockets[0].getsockname()[:2]
        async with server:
            req = json.dumps({"tx_id": "ap", "rx_id": "sta"})
            return await request_stream(host, port, [req, req])
    a, b = asyncio.run(go())
    assert a == b and json.loads(a)["status"] == "ok"


# ---------------------------------------------------------------- command line

def test_build_graph_writes_tables(toy_file, tmp_path):
    out = tmp_path / "g"
    assert cli.main(["build-graph", "--scenario", toy_file, "--out", str(out)]) == cli.OK
    assert (out / "nodes.csv").read_text().startswith("node_id,kind,")
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "build-graph"
    assert manifest["outputs"] == ["links.csv", "nodes.csv"]


def test_configure_kpaths_k2(toy_file, tmp_path):
    out = tmp_path / "c"
    assert cli.main(["configure", "--scenario", toy_file, "--optimizer", "kpaths", "--k", "2",
                     "--out", str(out)]) == cli.OK
    paths = read_table((out / "paths.csv").read_text())
    assert [r["rank"] for r in paths] == ["0", "1"]
    assert float(paths[0]["score"]) <= float(paths[1]["score"])
    assert read_table((out / "configuration.csv").read_text())
    assert json.loads((out / "report.json").read_text())["k"] == 2


@pytest.mark.parametrize("relax", [False, True])
def test_schedule_from_section(toy_file, tmp_path, relax):
    out = tmp_path / "s"
    argv = ["schedule", "--scenario", toy_file, "--out", str(out)] + (["--relax"] if relax else [])
    assert cli.main(argv) == cli.OK
    summary = json.loads((out / "schedule.json").read_text())
    assert summary["touches"] == 0 and summary["consistent"]
    assert (out / "schedule.csv").read_text() == "round,tile_id,function\n"
    assert "Subject To" in (out / "model.lp").read_text()


def test_simulate_writes_series(toy_file, tmp_path):
    out = tmp_path / "m"
    assert cli.main(["simulate", "--scenario", toy_file, "--mode", "on", "--seed", "3", "--out", str(out)]) == 0
    rows = read_table((out / "timeseries_on.csv").read_text())
    assert len(rows) == 21
    assert json.loads((out / "manifest.json").read_text())["seed"] == 3


def test_pdp_local(toy_file, capsys):
    assert cli.main(["pdp", "--scenario", toy_file, "--tx", "ap", "--rx", "sta"]) == cli.OK
    assert capsys.readouterr().out.startswith("path_index,power_dbm,")
    assert cli.main(["pdp", "--scenario", toy_file, "--tx", "ap", "--rx", "ghost"]) == cli.INVALID


def test_exit_codes(tmp_path, toy_file):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(dict(TOY, colour="blue")))
    assert cli.main(["build-graph", "--scenario", str(bad), "--out", str(tmp_path / "x")]) == cli.INVALID
    assert cli.main(["build-graph", "--scenario", str(tmp_path / "absent.json"), "--out", "x"]) == cli.INVALID
    with pytest.raises(SystemExit) as info:
        cli.main(["configure", "--scenario", toy_file])
    assert info.value.code == cli.INVALID
    assert cli.main(["configure", "--scenario", toy_file, "--k", "0", "--out", "x"]) == cli.INVALID
    # the bundled hall is far past the exact-search limits
    assert cli.main(["schedule", "--out", str(tmp_path / "big")]) == cli.FAILED
