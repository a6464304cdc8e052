#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "convsynth/types.hpp"

namespace convsynth {

class Rng;

namespace dsp {

// Windowed-sinc polyphase resampler. Output length is round(n * target / source);
// content below 0.45 * min(source, target) is kept within 0.5 dB. Same-rate
// input is returned unchanged.
AudioClip resample(const AudioClip& clip, int target_rate);

enum class NoiseFit { loop, crop };

struct MixResult {
  AudioClip mixture;
  double noise_scale = 1.0;  // gain applied to the noise before summation
  double peak_scale = 1.0;   // normalization applied to the sum (1.0 if none)
};

// Adds noise scaled so that 10*log10(P_signal / P_scaled_noise) == snr_db.
// With NoiseFit::crop the noise must be at least as long as the signal; with
// NoiseFit::loop it is tiled.
MixResult mix_at_snr(const AudioClip& signal, const AudioClip& noise, double snr_db,
                     NoiseFit fit = NoiseFit::loop);

double mean_power(const std::vector<double>& x);

struct FirDesign {
  double cutoff_hz = 0.0;
  double transition_hz = 0.0;
  double attenuation_db = 0.0;
  int sample_rate = 0;
};

struct FirFilter {
  std::vector<double> taps;  // odd length, linear phase
  FirDesign design;

  std::size_t group_delay() const { return taps.size() / 2; }
};

// Kaiser-windowed sinc low-pass. The transition band is centered on
// `cutoff_hz`: it spans cutoff +- transition/2.
FirFilter design_lowpass(double cutoff_hz, double transition_hz, double attenuation_db,
                         int sample_rate);

// Spectral inversion of the matching low-pass.
FirFilter design_highpass(double cutoff_hz, double transition_hz, double attenuation_db,
                          int sample_rate);

// Filters with group delay removed: output is aligned with and as long as the input.
AudioClip apply_fir(const AudioClip& clip, const FirFilter& filter);

// Telephone channel: 3400 Hz low-pass (300 Hz transition, 60 dB), optionally
// preceded by a 300 Hz high-pass.
AudioClip telephone_bandlimit(const AudioClip& clip, bool highpass = false);

struct VadParams {
  double frame_ms = 20.0;
  double hop_ms = 10.0;
  double energy_floor_db = -35.0;  // relative to the loudest frame
  int hangover_frames = 3;
};

struct TrimResult {
  AudioClip clip;
  double trimmed_lead = 0.0;  // seconds
  double trimmed_tail = 0.0;  // seconds
};

// Drops leading and trailing frames whose RMS falls below the relative
// threshold. Throws std::runtime_error("no speech detected") on silent input.
TrimResult trim_silence(const AudioClip& clip, const VadParams& params = {});

struct RoomSpec {
  std::array<double, 3> dimensions{5.0, 4.0, 3.0};
  double absorption = 0.3;  // energy absorption, uniform across walls
  std::array<double, 3> source{1.0, 1.0, 1.5};
  std::array<double, 3> mic{3.0, 2.5, 1.5};
  int max_order = 20;
  double speed_of_sound = 343.0;
  // High-pass applied to the reflections. All image taps are positive, so dense
  // late taps pile up as DC and stretch the decay; 0 disables.
  double highpass_hz = 100.0;
};

// Throws std::invalid_argument if the spec is out of range or degenerate.
void check_room(const RoomSpec& room);

// Image-source shoebox impulse response. Each image contributes
// beta^reflections / (4 pi d) at round(d / c * fs), beta = sqrt(1 - absorption).
// The direct path is left unfiltered.
AudioClip generate_rir(const RoomSpec& room, int sample_rate);

// Room dims in [3,8]x[3,8]x[2.5,4] m, absorption in [0.2,0.6], source and
// mic at least 0.5 m from every wall and 0.5 m from each other.
RoomSpec random_room(Rng& rng, int max_order = 20);

double sabine_rt60(const RoomSpec& room);

// RT60 from Schroeder backward integration, extrapolated from the -5..-25 dB fit.
double schroeder_rt60(const AudioClip& rir);

enum class ConvolutionMethod { automatic, direct, fft };

// Full linear convolution (length n + m - 1), peak-guarded.
AudioClip convolve(const AudioClip& clip, const AudioClip& rir,
                   ConvolutionMethod method = ConvolutionMethod::automatic);

// Unguarded convolution of raw buffers.
std::vector<double> convolve_raw(const std::vector<double>& a, const std::vector<double>& b,
                                 ConvolutionMethod method = ConvolutionMethod::automatic);

// Averages channels sample-wise; channels must share rate and length.
AudioClip mixdown(const std::vector<AudioClip>& channels);

}  // namespace dsp
}  // namespace convsynth
