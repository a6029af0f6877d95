import base64
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from maskdiff.imageio import decode_ppm, encode_pgm, encode_ppm
from maskdiff.rng import Rng
from maskdiff.service import create_app
from maskdiff.unet import UNet


def b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def make_body(**config):
    img = np.clip(Rng(50).fill_gaussian((3, 12, 12)) * 0.3, -1, 1)
    mask = np.zeros((12, 12), dtype=np.float32)
    mask[3:9, 3:9] = 1.0
    cfg = {"steps": 3, "timesteps_total": 60, "seed": 4}
    cfg.update(config)
    return {
        "image": b64(encode_ppm(img)),
        "mask": b64(encode_pgm(mask * 2.0 - 1.0)),
        "source_prompt": "a dog on a beach",
        "target_prompt": "a dog in the snow",
        "config": cfg,
    }


def wait_done(client, job_id, timeout=30.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        record = client.get(f"/v1/edits/{job_id}").json()
        if record["status"] in ("done", "failed"):
            return record
        time.sleep(0.05)
    raise TimeoutError("job did not finish")


@pytest.fixture(scope="module")
def client(unet_cfg, shared_weights, tmp_path_factory):
    model = UNet(unet_cfg, shared_weights)
    app = create_app(model, workers=2, result_dir=str(tmp_path_factory.mktemp("results")))
    with TestClient(app) as c:
        yield c


class TestLifecycle:
    def test_submit_poll_result(self, client):
        resp = client.post("/v1/edits", json=make_body())
        assert resp.status_code == 202
        job_id = resp.json()["id"]
        assert resp.json()["status"] == "queued"

        record = wait_done(client, job_id)
        assert record["status"] == "done"
        assert record["error"] is None
        assert record["request"]["config"]["steps"] == 3
        assert record["created_at"] <= record["started_at"] <= record["finished_at"]

        result = client.get(f"/v1/edits/{job_id}/result")
        assert result.status_code == 200
        assert result.headers["content-type"].startswith("image/x-portable-pixmap")
        img = decode_ppm(result.content)
        assert img.shape == (3, 12, 12)

    def test_result_before_done_conflicts(self, client):
        resp = client.post("/v1/edits", json=make_body(steps=6))
        job_id = resp.json()["id"]
        codes = set()
        # race the worker: some poll may already be done, but any non-done
        # state must yield 409, never 200 garbage
        r = client.get(f"/v1/edits/{job_id}/result")
        codes.add(r.status_code)
        assert codes <= {200, 409}
        wait_done(client, job_id)
        assert client.get(f"/v1/edits/{job_id}/result").status_code == 200

    def test_unknown_job(self, client):
        assert client.get("/v1/edits/no-such-id").status_code == 404
        assert client.get("/v1/edits/no-such-id/result").status_code == 404

    def test_health(self, client):
        resp = client.get("/v1/health")
        assert resp.status_code == 200
        assert resp.text == "ok"

    def test_defaults_endpoint(self, client):
        d = client.get("/v1/config/defaults").json()
        assert d["object"]["steps"] == 50
        assert d["object"]["pfb_blocks"] == [8, 13]
        assert d["object"]["am_blocks"] == [4, 13]
        assert d["object"]["pixel_blend_fraction"] == 0.5
        assert d["background"]["pixel_blend_fraction"] == 0.2
        assert d["background"]["tail_drop_fraction"] == 0.2


class TestValidation:
    def test_absent_am_word_field_error(self, client):
        body = make_body(am_words=["giraffe"])
        resp = client.post("/v1/edits", json=body)
        assert resp.status_code == 400
        report = resp.json()
        assert report["error"] == "validation"
        assert any(i["field"] == "am_words" and i["code"] == "lookup" for i in report["issues"])

    def test_bad_base64(self, client):
        body = make_body()
        body["image"] = "@@not-base64@@"
        resp = client.post("/v1/edits", json=body)
        assert resp.status_code == 400
        assert any(i["field"] == "image" for i in resp.json()["issues"])

    def test_missing_fields(self, client):
        resp = client.post("/v1/edits", json={"image": 5})
        assert resp.status_code == 400
        fields = {i["field"] for i in resp.json()["issues"]}
        assert {"image", "mask", "source_prompt", "target_prompt"} <= fields

    def test_mask_size_mismatch(self, client):
        body = make_body()
        wrong = np.zeros((5, 5), dtype=np.float32)
        body["mask"] = b64(encode_pgm(wrong))
        resp = client.post("/v1/edits", json=body)
        assert resp.status_code == 400
        assert any(i["code"] == "mask_shape" for i in resp.json()["issues"])

    def test_non_json_body(self, client):
        resp = client.post("/v1/edits", content=b"garbage",
                           headers={"content-type": "application/json"})
        assert resp.status_code == 400


class TestJobStore:
    def test_transitions_only_forward(self):
        from maskdiff.service import JobStore

        store = JobStore()
        record = store.create({"x": 1})
        store.advance(record["id"], "running")
        store.advance(record["id"], "done", result_path="/tmp/x")
        with pytest.raises(RuntimeError):
            store.advance(record["id"], "queued")
        with pytest.raises(RuntimeError):
            store.advance(record["id"], "running")
        assert store.get(record["id"])["status"] == "done"


class TestDeterminismAndBackpressure:
    def test_same_request_same_payload(self, client):
        body = make_body(seed=77)
        payloads = []
        ids = [client.post("/v1/edits", json=body).json()["id"] for _ in range(2)]
        for job_id in ids:
            record = wait_done(client, job_id)
            assert record["status"] == "done"
            payloads.append(client.get(f"/v1/edits/{job_id}/result").content)
        assert payloads[0] == payloads[1]

    def test_queue_full_gives_503(self, unet_cfg, shared_weights, tmp_path):
        model = UNet(unet_cfg, shared_weights)
        app = create_app(model, workers=0, queue_limit=2, result_dir=str(tmp_path))
        with TestClient(app) as c:
            body = make_body()
            assert c.post("/v1/edits", json=body).status_code == 202
            assert c.post("/v1/edits", json=body).status_code == 202
            resp = c.post("/v1/edits", json=body)
            assert resp.status_code == 503
            assert resp.json()["error"] == "queue_full"
