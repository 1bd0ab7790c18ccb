from .pattern import PATTERN_COMPONENTS as _PATTERN_COMPONENTS
from .perturb import GaussianBlur, GaussianNoise, RandomRotate, RandomShear, Rotate, Shear

PATTERN_MAP = {kind.value: components for kind, components in _PATTERN_COMPONENTS.items()}

# settings of the baseline comparison tables
BASELINE_PRESETS = {
    "blur_3": GaussianBlur(3),
    "blur_7": GaussianBlur(7),
    "blur_11": GaussianBlur(11),
    "blur_21": GaussianBlur(21),
    "noise_5": GaussianNoise(5.0),
    "noise_10": GaussianNoise(10.0),
    "noise_25": GaussianNoise(25.0),
    "noise_50": GaussianNoise(50.0),
    "rotate_15": Rotate(15.0),
    "rotate_30": Rotate(30.0),
    "rotate_45": Rotate(45.0),
    "random_rotate_45": RandomRotate(45.0),
    "shear_x_0.2": Shear(0.2, 0.0),
    "shear_xy_0.15": Shear(0.15, 0.15),
    "shear_y_0.2": Shear(0.0, 0.2),
    "random_shear_0.3": RandomShear(0.3),
}
