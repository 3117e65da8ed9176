from .app import create_app
from .models import PROTOCOL_VERSION, ProtocolRequest, ProtocolResponse

__all__ = ["PROTOCOL_VERSION", "ProtocolRequest", "ProtocolResponse", "create_app"]
