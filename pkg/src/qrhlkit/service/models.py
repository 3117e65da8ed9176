"""Pydantic request/response models of the session protocol (schema v1).

Every request gets exactly one response; session state is event-sourced and
fully reconstructible from the message log.
"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field

PROTOCOL_VERSION = 1

RequestKind = Literal["load", "state", "tactic", "undo", "goals", "varsets", "predeval"]
ResponseKind = Literal["state", "goals", "varsets", "predeval", "error"]


class ProtocolRequest(BaseModel):
    kind: RequestKind
    payload: dict = Field(default_factory=dict)


class ProtocolResponse(BaseModel):
    kind: ResponseKind
    payload: dict = Field(default_factory=dict)


class SessionCreated(BaseModel):
    session_id: str
    protocol_version: int = PROTOCOL_VERSION


class SessionLog(BaseModel):
    session_id: str
    entries: list  # [(request text, response kind, response text)]


class Health(BaseModel):
    status: str = "ok"
    protocol_version: int = PROTOCOL_VERSION
