from bladesim.scenario import Scenario, build_simulation


class FixedDraws:
    """Stand-in RNG: ``randint`` returns the queued values, then ``fallback``."""

    def __init__(self, values, fallback=0):
        self.values = list(values)
        self.fallback = fallback

    def randint(self, lo, hi):
        v = self.values.pop(0) if self.values else self.fallback
        assert lo <= v <= hi, (v, lo, hi)
        return v


def sim_with_draws(data, draws):
    sim = build_simulation(Scenario.from_dict(data))
    for st, d in zip(sim.stations, draws):
        st.rng = FixedDraws(d)
    return sim
