"""Minimal JSON-over-HTTP client with retry."""

from __future__ import annotations

import json
import logging
import time
import urllib.error
import urllib.request

from .errors import InputError, ProtocolError, TransportError

logger = logging.getLogger(__name__)


def post_json(
    url: str,
    payload: dict,
    *,
    api_key: str | None = None,
    timeout: float = 60.0,
    retries: int = 3,
    backoff: float = 1.0,
    sleep=time.sleep,
) -> dict:
    """POST *payload* as JSON and return the decoded JSON body.

    Connection failures, 429 and 5xx responses are retried ``retries`` times
    with exponential backoff before a :class:`TransportError` is raised. Other
    4xx responses raise :class:`InputError` straight away.
    """
    data = json.dumps(payload).encode("utf-8")
    headers = {"Content-Type": "application/json"}
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"
    delay = backoff
    for attempt in range(retries + 1):
        request = urllib.request.Request(url, data=data, headers=headers, method="POST")
        try:
            with urllib.request.urlopen(request, timeout=timeout) as resp:
                raw = resp.read()
            break
        except urllib.error.HTTPError as e:
            if e.code != 429 and e.code < 500:
                detail = e.read().decode("utf-8", "replace")[:200]
                raise InputError(f"{url} rejected the request ({e.code}): {detail}") from e
            error: Exception = e
        except (urllib.error.URLError, TimeoutError, ConnectionError) as e:
            error = e
        if attempt == retries:
            raise TransportError(f"{url} failed after {retries + 1} attempts: {error}") from error
        logger.warning("%s failed (%s), retrying in %.1fs", url, error, delay)
        sleep(delay)
        delay *= 2
    try:
        return json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ProtocolError(f"{url} returned a non-JSON body") from e
