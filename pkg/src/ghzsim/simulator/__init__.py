from .coincidence import (
    CoincidenceEvent,
    CoincidenceEvents,
    accidental_rate,
    counts_to_record,
    find_coincidences,
    merge_streams,
    reference_coincidences,
)
from .sampling import expected_counts, merge_records, sample_counts
from .streams import TimestampStream, generate_streams, independent_streams
from .tsfile import read_timestamps, write_timestamps

__all__ = [
    "CoincidenceEvent",
    "CoincidenceEvents",
    "TimestampStream",
    "accidental_rate",
    "counts_to_record",
    "expected_counts",
    "find_coincidences",
    "generate_streams",
    "independent_streams",
    "merge_records",
    "merge_streams",
    "read_timestamps",
    "reference_coincidences",
    "sample_counts",
    "write_timestamps",
]
