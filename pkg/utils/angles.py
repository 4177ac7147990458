import math

HALF_PI = math.pi / 2


def normalize_angle(theta: float) -> float:
    """
    Map an ellipse rotation onto [-pi/2, pi/2].

    Values already inside the closed interval are returned unchanged (so -pi/2
    stays -pi/2); everything else is wrapped by multiples of pi into (-pi/2, pi/2].
    """
    if -HALF_PI <= theta <= HALF_PI:
        return float(theta)
    wrapped = HALF_PI - math.fmod(HALF_PI - theta, math.pi)
    if wrapped > HALF_PI:
        wrapped -= math.pi
    elif wrapped <= -HALF_PI:
        wrapped += math.pi
    return float(wrapped)


def wrap_difference(delta: float) -> float:
    """Wrap an angle difference into [-pi/2, pi/2) (period pi)."""
    return float((delta + HALF_PI) % math.pi - HALF_PI)
