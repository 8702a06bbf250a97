"""Forward TRFs on a synthetic four-talker session.

Generate a handful of trials in which one of four talkers is attended,
estimate a forward model for every talker in every trial, and compare the
grand-average response to the attended talker with the response to the
ignored ones.

Run with ``python3 demos/01_forward_trfs.py``.
"""

import numpy as np

from earaad import SynthConfig, contrast_trfs, estimate_trf, generate_dataset

# Three subjects, ten one-minute trials each, noise as strong as the signal.
config = SynthConfig(n_subjects=3, trials_per_subject=10, snr_db=0.0, seed=1)
trials = generate_dataset(config)
print(f"{len(trials)} trials, {trials[0].eeg.n_channels} channels at {trials[0].fs:g} Hz")

# One TRF per talker per trial, all with the same ridge parameter so the
# comparison is not confounded by regularization.
lam = 1e-2
items = [(t, [estimate_trf(c, t.eeg, config.lags, lam) for c in t.candidates]) for t in trials]
contrast = contrast_trfs(items)

print(f"attended peak   {contrast.attended_peak:.3f}")
print(f"unattended peak {contrast.unattended_peak:.3f}")
print("per ignored talker:", " ".join(f"{p:.3f}" for p in contrast.per_stream_peaks))

# Print the attended and unattended response of one channel around the peak.
lag = contrast.attended.lag_axis_ms
ch = 0
print(f"\nchannel {contrast.attended.channels[ch]}")
print("  lag_ms  attended  unattended")
for i in np.flatnonzero((lag >= 50) & (lag <= 300)):
    print(f"  {lag[i]:6.1f}  {contrast.attended.weights[i, ch]:8.3f}  "
          f"{contrast.unattended.weights[i, ch]:10.3f}")
