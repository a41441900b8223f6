// Discrete-time signal core for UWB radar frames: DFT/IDFT, pass-band
// filtering, frequency band estimation, circular shifts and patch placement.
//
// Conventions, used consistently everywhere:
//   forward DFT   F(k) = sum_n f(n) exp(-i 2 pi n k / N)   (unnormalized)
//   inverse DFT   f(n) = (1/N) sum_k F(k) exp(+i 2 pi n k / N)
//   bin k of an N-point transform sits at frequency k * sample_rate / N.
#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace arna {

// UMAIN HST-D3 style acquisition: 7.69 GHz sampling, 660 samples per frame.
inline constexpr double kDefaultSampleRateHz = 7.69e9;
inline constexpr int kFrameLength = 660;

// Real discrete-time signal plus the rate its sample grid refers to.
struct Signal {
    std::vector<double> samples;
    double sample_rate_hz = kDefaultSampleRateHz;

    Signal() = default;
    Signal(std::vector<double> s, double rate = kDefaultSampleRateHz)
        : samples(std::move(s)), sample_rate_hz(rate) {}

    std::size_t size() const noexcept { return samples.size(); }
    double& operator[](std::size_t i) { return samples[i]; }
    const double& operator[](std::size_t i) const { return samples[i]; }
};

bool operator==(const Signal& a, const Signal& b);

// Complex spectrum of a real signal; bins.size() equals the signal length.
struct Spectrum {
    std::vector<std::complex<double>> bins;
    double sample_rate_hz = kDefaultSampleRateHz;

    std::size_t size() const noexcept { return bins.size(); }
};

// Physical pass band in Hz, inclusive at both edges.
struct FrequencyBand {
    double f_min_hz = 0.0;
    double f_max_hz = 0.0;
};

// True iff 0 <= f_min <= f_max <= sample_rate/2.
bool is_valid_band(const FrequencyBand& band, double sample_rate_hz);

// Forward transform of any length >= 1. Mixed-radix FFT for composite sizes,
// direct evaluation for prime factors; bit-identical across runs.
Spectrum dft(const Signal& x);

// Inverse transform. The spectrum must be conjugate-symmetric (it came from a
// real signal); if the reconstructed imaginary residue exceeds 1e-6 relative
// to the largest bin magnitude the input was not, and std::domain_error is
// thrown rather than silently dropping the imaginary part.
Signal idft(const Spectrum& s);

// Zeroes every spectral bin whose physical frequency lies outside
// [f_min, f_max] (inclusive); a bin and its conjugate mirror are always kept
// or dropped together so the output stays real. Idempotent.
Signal passband_filter(const Signal& x, const FrequencyBand& band);

// Smallest contiguous one-sided bin window that captures `power_fraction` of
// the average spectral power of `signals` (conjugate-mirror bins counted with
// their one-sided partner). The window starts at the strongest bin and grows
// greedily toward the neighbouring bin with more power, ties toward the lower
// frequency. Returns the window edges as physical frequencies.
FrequencyBand estimate_band(const std::vector<Signal>& signals, double power_fraction = 0.95);

// Cyclic delay by k samples: out[j] = x[(j - k) mod d], 0 <= k <= d.
Signal circular_shift(const Signal& x, std::size_t k);

// Places a length-s patch at offset k inside an otherwise zero frame of
// length `frame_length`. A patch that would run past the end is truncated,
// not wrapped: out[k + i] = delta[i] for i < min(s, frame_length - k).
Signal mask_patch(const Signal& delta, std::size_t k, std::size_t frame_length);

// Mean and peak magnitude over all bins of the frame-length transform of x
// (x is zero-padded to `frame_length` first so short patches are comparable).
struct SpectralStats {
    double avg_magnitude = 0.0;
    double max_magnitude = 0.0;
};
SpectralStats spectral_magnitude_stats(const Signal& x, std::size_t frame_length = kFrameLength);

}  // namespace arna
