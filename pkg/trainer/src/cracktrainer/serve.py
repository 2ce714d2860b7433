"""Classifier wire protocol server.

POST /classify with raw PNG bytes -> {"label": "Crack"|"NonCrack",
"confidence": 0..1}; undecodable bodies get 400. Bit-compatible with the
mission toolkit's loopback contract.
"""

from __future__ import annotations

import io
import json

import numpy as np
import torch
from fastapi import FastAPI, Request, Response
from PIL import Image

from .data import CLASSES


def classify_bytes(model, meta: dict, png: bytes) -> dict:
    size = meta["input_size"]
    try:
        img = Image.open(io.BytesIO(png)).convert("RGB")
    except Exception as exc:
        raise ValueError(f"cannot decode image: {exc}") from exc
    arr = np.asarray(img.resize((size, size), Image.BILINEAR),
                     dtype=np.float32) / 255.0
    x = torch.from_numpy(arr).permute(2, 0, 1).unsqueeze(0)
    with torch.no_grad():
        probs = torch.softmax(model(x), dim=1)[0]
    k = int(probs.argmax())
    return {"label": CLASSES[k], "confidence": float(probs[k])}


def build_app(model, meta: dict) -> FastAPI:
    app = FastAPI(title="cracktrainer-classifier")
    model.eval()

    @app.post("/classify")
    async def classify(request: Request):
        body = await request.body()
        try:
            doc = classify_bytes(model, meta, body)
        except ValueError as exc:
            return Response(content=json.dumps({"error": str(exc)}),
                            status_code=400, media_type="application/json")
        return doc

    return app


def serve(model, meta: dict, host: str, port: int):
    import uvicorn
    uvicorn.run(build_app(model, meta), host=host, port=port,
                log_level="warning")
