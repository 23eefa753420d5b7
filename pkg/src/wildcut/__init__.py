"""wildcut: a resumable pipeline that turns long in-the-wild recordings into
a filtered, annotated, segment-level training corpus."""

__version__ = "0.1.0"

from .model import (  # noqa: F401
    AudioSource,
    DropRecord,
    Segment,
    SegmentRecord,
    SpeakerTurn,
    VadChunk,
    decode_record,
    encode_record,
    validate_manifest,
)
from .orchestrator import plan, run  # noqa: F401
