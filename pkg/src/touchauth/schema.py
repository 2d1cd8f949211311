"""Column layout of the fused touch + motion dataset."""

TOUCH_FIELDS = (
    "stroke_duration",
    "start_x",
    "start_y",
    "stop_x",
    "stop_y",
    "direct_end_to_end_distance",
    "mean_resultant_length",
    "up_down_left_right",
    "direction_of_end_to_end_line",
    "largest_deviation_from_end_to_end",
    "average_direction",
    "length_of_trajectory",
    "average_velocity",
    "mid_stroke_pressure",
    "mid_stroke_area_covered",
)

MOTION_FIELDS = (
    "acc_x",
    "acc_y",
    "acc_z",
    "gyro_x",
    "gyro_y",
    "gyro_z",
    "mag_x",
    "mag_y",
    "mag_z",
)

# Order used by the canonical CSV and by every feature vector.
FEATURE_NAMES = TOUCH_FIELDS + MOTION_FIELDS
CANONICAL_HEADER = ("user_id",) + FEATURE_NAMES

N_TOUCH = len(TOUCH_FIELDS)
N_MOTION = len(MOTION_FIELDS)
N_FEATURES = len(FEATURE_NAMES)

# up_down_left_right is carried as a numeric category code.
DIRECTION_CODES = {"up": 0, "down": 1, "left": 2, "right": 3}
