import random

import numpy as np
import pytest

from recaudit.datamodel import (
    CAP_ISSUES,
    IDEOLOGIES,
    NEWS_POLITICS,
    AccountProfile,
    Dataset,
    ExposureRecord,
    Group,
    Kind,
)

CATEGORIES = ["Gaming", "Sports", "Autos & Vehicles", "Howto & Style", "People & Blogs", NEWS_POLITICS, "Music"]


def random_dataset(seed, n_accounts=6, t_max=20, per_step=3, n_videos=40, p_political=0.5):
    """Small random log that satisfies every schema invariant."""
    rnd = random.Random(seed)
    profiles = [AccountProfile(f"a{i:02d}", Group.MALE if i % 2 == 0 else Group.FEMALE) for i in range(n_accounts)]
    records = []
    for p in profiles:
        for step in range(1, t_max + 1):
            vids = rnd.sample(range(n_videos), per_step)
            for kind, chosen in ((Kind.EXPOSURE, vids), (Kind.CLICK, vids[:1])):
                for v in chosen:
                    political = rnd.random() < p_political
                    issue = rnd.choice(CAP_ISSUES + ("Other",)) if political and rnd.random() < 0.9 else None
                    ideology = rnd.choice(IDEOLOGIES) if political and rnd.random() < 0.8 else None
                    cat = NEWS_POLITICS if political else rnd.choice(CATEGORIES)
                    records.append(ExposureRecord(p.account_id, step, kind, f"vid{v}", cat, political, issue, ideology))
    records.sort(key=ExposureRecord.sort_key)
    return Dataset(profiles, records, t_max)


@pytest.fixture
def small_dataset():
    return random_dataset(0)


def random_weight_matrix(rng, n, max_w=6, p_zero=0.3):
    w = rng.integers(1, max_w + 1, size=(n, n))
    w[rng.random((n, n)) < p_zero] = 0
    w = np.triu(w, 1)
    return w + w.T


def planted_two_clique(seed, size=20, p_in=0.9, p_out=0.05):
    """Unit-weight planted-partition graph and its ground-truth labels."""
    rng = np.random.default_rng(seed)
    n = 2 * size
    truth = np.repeat([0, 1], size)
    same = truth[:, None] == truth[None, :]
    draw = rng.random((n, n)) < np.where(same, p_in, p_out)
    w = np.triu(draw, 1).astype(np.int64)
    return w + w.T, truth.tolist()


#: one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
