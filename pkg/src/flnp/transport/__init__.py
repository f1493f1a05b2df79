from .frame import (
    DEFAULT_MAX_PAYLOAD,
    DecodeError,
    FRAME_MAGIC,
    FRAME_VERSION,
    build_frame,
    parse_frame,
)
from .codec import (
    compute_auth_tag,
    decode_message,
    encode_message,
    encode_parameter_set,
    decode_parameter_set,
    sign,
    verify_auth,
)
from .channel import ChannelEndpoint, LinkClosedError, channel_pair
from .tcp import TcpConnection, TcpServer, connect

__all__ = [
    "DEFAULT_MAX_PAYLOAD",
    "DecodeError",
    "FRAME_MAGIC",
    "FRAME_VERSION",
    "build_frame",
    "parse_frame",
    "compute_auth_tag",
    "decode_message",
    "encode_message",
    "encode_parameter_set",
    "decode_parameter_set",
    "sign",
    "verify_auth",
    "ChannelEndpoint",
    "LinkClosedError",
    "channel_pair",
    "TcpConnection",
    "TcpServer",
    "connect",
]
