"""Sentence embedding service for the http_service backend.

POST /embed {"texts": [...]} -> {"vectors": [[...], ...]}
"""
import argparse

import uvicorn
from fastapi import FastAPI
from pydantic import BaseModel
from sentence_transformers import SentenceTransformer


class EmbedRequest(BaseModel):
    texts: list[str]


def make_app(model_name: str) -> FastAPI:
    model = SentenceTransformer(model_name)
    app = FastAPI()

    @app.post("/embed")
    def embed(req: EmbedRequest):
        vectors = model.encode(req.texts, convert_to_numpy=True, normalize_embeddings=False)
        return {"vectors": vectors.tolist()}

    return app


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--model", default="sentence-transformers/all-MiniLM-L12-v2")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8088)
    args = parser.parse_args()
    uvicorn.run(make_app(args.model), host=args.host, port=args.port)


if __name__ == "__main__":
    main()
