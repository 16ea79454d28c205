"""Spiking-transformer audio denoising pipeline.

Subpackages cover WAV and synthetic-dataset handling (audio), STFT/ISTFT
(dsp), spike codecs (spike_coding), LIF neuron dynamics (neuron), the
closed-form expressivity demo (expressivity), the trainable denoiser
(model), SI-SNR evaluation (metrics), the analytic MAC/throughput cost
model (perf), and the command-line front end (cli).
"""

__version__ = "0.1.0"
