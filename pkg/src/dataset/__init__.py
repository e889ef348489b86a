from .scanner import scan_dataset, load_record, iter_records, read_rgb, read_mask
from .capacity import pad_to_capacity, truncate_to_capacity
from .fixtures import CABLE_COLORS, generate_fixture_set, fixture_records
from .validation import ValidationReport, validate_dataset
