"""HTTP client for the service; the CLI's only path into the core.

Without a server URL the client mounts the ASGI app in process, so every
CLI verb exercises the same HTTP surface a remote deployment would, with no
daemon required.
"""

from __future__ import annotations

import httpx


class ServiceError(RuntimeError):
    def __init__(self, status_code: int, detail):
        self.status_code = status_code
        self.detail = detail
        super().__init__(f"service returned {status_code}: {detail}")


class ServiceClient:
    def __init__(self, base_url: str | None = None, timeout: float = 7200.0):
        if base_url:
            self._client = httpx.Client(base_url=base_url, timeout=timeout)
        else:
            import warnings

            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                from starlette.testclient import TestClient

            from .service import app

            # Sync HTTP client mounted directly on the ASGI app; requests
            # traverse the same routes a networked deployment would.
            self._client = TestClient(app)

    def close(self) -> None:
        self._client.close()

    def __enter__(self) -> "ServiceClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _request(self, method: str, path: str, **kwargs):
        response = self._client.request(method, path, **kwargs)
        if response.status_code >= 400:
            try:
                detail = response.json().get("detail", response.text)
            except ValueError:
                detail = response.text
            raise ServiceError(response.status_code, detail)
        return response

    def health(self) -> dict:
        return self._request("GET", "/health").json()

    def codebooks_csv(self) -> str:
        return self._request("GET", "/codebooks.csv").text

    def codebook(self, q_level: int) -> dict:
        return self._request("GET", f"/codebooks/{q_level}").json()

    def compress(self, values, params: dict) -> dict:
        return self._request(
            "POST", "/codec/compress", json={"values": list(values), "params": params}
        ).json()

    def reconstruct(self, payload_hex: str, bit_length: int, params: dict) -> list[float]:
        body = {"payload_hex": payload_hex, "bit_length": bit_length, "params": params}
        return self._request("POST", "/codec/reconstruct", json=body).json()["values"]

    def inspect(self, payload_hex: str, bit_length: int, params: dict) -> dict:
        body = {"payload_hex": payload_hex, "bit_length": bit_length, "params": params}
        return self._request("POST", "/codec/inspect", json=body).json()

    def choose(self, values, capacity_bits: int, q_set=None, exhaustive=False) -> dict:
        body = {
            "values": list(values),
            "capacity_bits": capacity_bits,
            "q_set": list(q_set) if q_set else None,
            "exhaustive": exhaustive,
        }
        return self._request("POST", "/optimizer/choose", json=body).json()

    def presets(self) -> list[str]:
        return self._request("GET", "/presets").json()["presets"]

    def run(self, config: dict, round_limit: int | None = None) -> dict:
        body = {"config": config, "round_limit": round_limit}
        return self._request("POST", "/experiments/run", json=body).json()

    def ablate(
        self,
        config: dict,
        q_levels=(),
        kappas=(),
        round_limit: int | None = None,
    ) -> dict:
        body = {
            "config": config,
            "q_levels": list(q_levels),
            "kappas": list(kappas),
            "round_limit": round_limit,
        }
        return self._request("POST", "/experiments/ablate", json=body).json()
