import io
import json
from pathlib import Path

import jsonschema
import numpy as np
import pytest
from fastapi.testclient import TestClient

from cracktrainer.model import load_artifact
from cracktrainer.serve import build_app
from conftest import draw_sample

# shared contract fixture, also used by the mission toolkit's loopback tests
GOLDEN = json.loads(
    (Path(__file__).resolve().parents[2] / "tests" / "golden"
     / "classifier_protocol.json").read_text())


@pytest.fixture(scope="module")
def client(trained_model):
    _, artifact = trained_model
    model, meta = load_artifact(artifact)
    return TestClient(build_app(model, meta))


def png_bytes(with_crack: bool, seed: int = 5) -> bytes:
    img = draw_sample(np.random.default_rng(seed), with_crack)
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


class TestWireProtocol:
    def test_crack_image_conforms_to_golden_schema(self, client):
        resp = client.post("/classify", content=png_bytes(True))
        assert resp.status_code == 200
        doc = resp.json()
        jsonschema.validate(doc, GOLDEN["response_schema"])
        assert doc["label"] in ("Crack", "NonCrack")
        assert 0.0 <= doc["confidence"] <= 1.0

    def test_malformed_body_is_400(self, client):
        resp = client.post("/classify", content=b"definitely not a png")
        assert resp.status_code == GOLDEN["malformed_body_status"]

    def test_labels_track_content(self, client):
        votes = {"crack": 0, "clean": 0}
        for seed in range(8):
            r1 = client.post("/classify", content=png_bytes(True, seed)).json()
            r2 = client.post("/classify", content=png_bytes(False, seed)).json()
            votes["crack"] += r1["label"] == "Crack"
            votes["clean"] += r2["label"] == "NonCrack"
        assert votes["crack"] >= 6
        assert votes["clean"] >= 6

    def test_responses_always_in_contract_ranges(self, client):
        for seed in range(5):
            doc = client.post("/classify", content=png_bytes(seed % 2 == 0,
                                                             seed)).json()
            jsonschema.validate(doc, GOLDEN["response_schema"])
