"""Wall-clock accounting split into linear solves, flux assembly and the rest.

A :class:`CategoryTimer` works by laps: every call to :meth:`lap` charges
the time elapsed since the previous lap to one category, so the categories
are disjoint and together cover the whole instrumented interval.
"""

from time import perf_counter

CATEGORIES = ("linear_solves", "flux_assembly", "other")


class CategoryTimer:
    def __init__(self):
        self.totals = dict.fromkeys(CATEGORIES, 0.0)
        self._start = self._last = perf_counter()

    def lap(self, category):
        now = perf_counter()
        self.totals[category] += now - self._last
        self._last = now

    def restart(self):
        self.totals = dict.fromkeys(CATEGORIES, 0.0)
        self._start = self._last = perf_counter()

    @property
    def wall(self):
        return self._last - self._start

    def as_dict(self):
        out = dict(self.totals)
        out["total"] = sum(self.totals.values())
        return out


class NullTimer:
    """Drop-in timer that records nothing."""

    totals = dict.fromkeys(CATEGORIES, 0.0)

    def lap(self, category):
        pass

    def restart(self):
        pass

    wall = 0.0

    def as_dict(self):
        out = dict(self.totals)
        out["total"] = 0.0
        return out


NULL_TIMER = NullTimer()
