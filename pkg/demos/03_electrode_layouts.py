"""Where the electrodes sit matters more than how many there are.

The synthetic montage has twenty informative ear channels plus twenty
distal channels that only record noise. Decoding with equally sized
subsets shows the placement effect directly.

Run with ``python3 demos/03_electrode_layouts.py``.
"""

from earaad import BUILTIN_LAYOUTS, SynthConfig, evaluate, generate_dataset

config = SynthConfig(n_subjects=3, trials_per_subject=8, n_distal_channels=20, snr_db=0.0,
                     seed=5)
trials = generate_dataset(config)

for name in ("ear", "left", "right", "distal"):
    layout = BUILTIN_LAYOUTS[name]
    table = evaluate(trials, [10.0, 60.0], layout=layout)
    print(f"{name:>6} ({len(layout.channels):2d} ch): "
          f"10 s {table.mean_accuracy(10.0):.3f}   60 s {table.mean_accuracy(60.0):.3f}")

# Layouts for real recordings are plain text files, one channel label per
# line, passed to the command-line tool with --layout path/to/file.txt.
