"""Label total variation between the two groups of the Adult count table."""
from fairgap.metrics import tv_histogram
from fairgap.presets import ADULT_LABEL_COUNTS, adult_label_fixture

y, a = adult_label_fixture()
for (g, label), n in sorted(ADULT_LABEL_COUNTS.items()):
    print(f"A={g} Y={label}: {n}")
print(f"tv_labels = {tv_histogram(y[a == 0], y[a == 1]):.6f}")
