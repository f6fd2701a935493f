#pragma once

#include <unistd.h>

#include <filesystem>
#include <random>
#include <string>

#include "waterwave/volume.hpp"

namespace test {

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("waterwave_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

template <typename Scalar = double>
waterwave::Volume<Scalar> random_volume(const waterwave::Shape4& s, std::mt19937_64& rng, double lo = 0.0,
                                        double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  waterwave::Volume<Scalar> v(s);
  for (waterwave::Index i = 0; i < v.size(); ++i) v.data()[i] = Scalar(dist(rng));
  return v;
}

}  // namespace test
