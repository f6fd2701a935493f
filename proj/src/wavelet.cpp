#include "waterwave/wavelet.hpp"

#include <bit>

namespace waterwave {

double haar_coefficient(std::span<const double> samples, int level, long shift) {
  const std::size_t n = samples.size();
  if (n < 2 || !std::has_single_bit(n)) throw ShapeError("haar_coefficient needs 2^m samples");
  const int m = std::countr_zero(n);
  if (level < 0 || m < level + 1)
    throw InvalidArgument("haar_coefficient: level " + std::to_string(level) + " too fine for 2^" + std::to_string(m) +
                          " samples");
  if (shift < 0 || shift >= (1L << level))
    throw InvalidArgument("haar_coefficient: (j,k) = (" + std::to_string(level) + "," + std::to_string(shift) +
                          ") has no support on [0,1]");
  // Support of psi(2^j t - k) covers samples [k*block, (k+1)*block).
  const std::size_t block = n >> level;
  const std::size_t begin = static_cast<std::size_t>(shift) * block;
  double first = 0.0, second = 0.0;
  for (std::size_t i = 0; i < block / 2; ++i) first += samples[begin + i];
  for (std::size_t i = block / 2; i < block; ++i) second += samples[begin + i];
  return std::exp2(0.5 * level) * (first - second) / static_cast<double>(n);
}

HaarCascade haar_cascade(const Signal<double>& signal, int levels) {
  if (levels < 1) throw InvalidArgument("haar_cascade needs at least one level");
  HaarCascade out;
  Signal<double> current = signal;
  for (int l = 0; l < levels; ++l) {
    auto lifted = lift_forward(current);
    out.highs.push_back(std::move(lifted.high));
    current = std::move(lifted.low);
  }
  out.low = std::move(current);
  return out;
}

}  // namespace waterwave
