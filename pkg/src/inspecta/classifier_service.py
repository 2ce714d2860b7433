"""Loopback HTTP server for the classifier wire protocol.

POST /classify with raw PNG bytes returns
{"label": "Crack"|"NonCrack", "confidence": 0..1}; undecodable bodies get
a 400. The trainer's serve mode implements this same contract.
"""

import json

from fastapi import FastAPI, Request, Response

from .revisit import ClassificationResult, InputError, detect_reference


def build_classifier_app(classify_fn=None) -> FastAPI:
    if classify_fn is None:
        def classify_fn(png: bytes) -> ClassificationResult:
            return detect_reference(png)

    app = FastAPI(title="inspecta-classifier")

    @app.post("/classify")
    async def classify(request: Request):
        body = await request.body()
        try:
            result = classify_fn(body)
        except InputError as exc:
            return Response(content=json.dumps({"error": str(exc)}),
                            status_code=400, media_type="application/json")
        return {"label": result.label, "confidence": result.confidence}

    return app
