#pragma once

// Shared fixtures: scratch directories, a cached small pretrained CNN, and a
// central finite-difference gradient checker.

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "xtamer/cnn.hpp"
#include "xtamer/network.hpp"
#include "xtamer/rng.hpp"

namespace xtamer::testing {

namespace fs = std::filesystem;

class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag) {
    Rng rng(std::uint64_t(std::hash<std::string>{}(tag)) ^ std::uint64_t(::getpid()));
    path_ = fs::temp_directory_path() / ("xtamer-" + tag + "-" + std::to_string(rng.next() % 1000000007ULL));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  const fs::path& path() const noexcept { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline TensorD random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  TensorD t(std::move(shape));
  for (Index i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

/// Balanced render set: every emotion for each of `identities` identities.
inline std::vector<LabeledImage> render_set(int identities, double noise, std::uint64_t seed) {
  std::vector<LabeledImage> out;
  Rng rng(seed);
  for (int k = 0; k < identities; ++k) {
    const auto id = IdentityParams::from_seed(rng.next());
    for (Emotion e : kAllEmotions) out.push_back({render_face(e, id, noise, rng.next()), e});
  }
  return out;
}

/// A CNN pretrained on a few hundred renders; built once and cached on disk
/// so every test binary shares it.
inline std::shared_ptr<const CnnModel> small_cnn() {
  static std::shared_ptr<const CnnModel> cached = [] {
    const fs::path dir = XTAMER_TEST_CACHE;
    const fs::path file = dir / "small_cnn_v1.xtm";
    if (fs::exists(file)) return std::make_shared<const CnnModel>(load_model(file));
    PretrainOptions o;
    o.epochs = 8;
    o.seed = 11;
    auto r = pretrain(render_set(30, 0.05, 0xC0FFEE), o);
    fs::create_directories(dir);
    const fs::path tmp = dir / ("small_cnn_v1.xtm.tmp" + std::to_string(::getpid()));
    save_model(tmp, r.model);
    fs::rename(tmp, file);
    return std::make_shared<const CnnModel>(std::move(r.model));
  }();
  return cached;
}

inline double relative_error(double a, double n) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-6});
}

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
};

/// Compares backward() against central differences of L = r . f(x) for a
/// random projection r. At most `per_tensor` entries of each parameter
/// tensor (and of the input) are probed, chosen at random; 0 probes all.
inline GradCheckResult check_gradients(nn::Network<double> net, TensorD input, std::uint64_t seed,
                                       std::size_t per_tensor = 0, double h = 1e-5) {
  Rng rng(seed);
  const auto cache = net.forward(input);
  const TensorD r = random_tensor(cache.output().shape(), rng);
  const auto grads = nn::backward(net, cache, r, true);

  auto loss = [&](const nn::Network<double>& n, const TensorD& x) { return n.predict(x).data().dot(r.data()); };

  GradCheckResult out;
  auto probe = [&](TensorD& target, const TensorD& analytic, auto&& eval) {
    std::vector<Index> idx(std::size_t(target.size()));
    for (Index i = 0; i < target.size(); ++i) idx[std::size_t(i)] = i;
    if (per_tensor && idx.size() > per_tensor) {
      rng.shuffle(std::span<Index>(idx));
      idx.resize(per_tensor);
    }
    for (Index i : idx) {
      const double saved = target[i];
      target[i] = saved + h;
      const double up = eval();
      target[i] = saved - h;
      const double down = eval();
      target[i] = saved;
      const double numeric = (up - down) / (2 * h);
      out.max_relative_error = std::max(out.max_relative_error, relative_error(analytic[i], numeric));
      ++out.checked;
    }
  };

  auto params = net.parameters();
  for (std::size_t p = 0; p < params.size(); ++p)
    probe(*params[p], grads.params[p], [&] { return loss(net, input); });
  probe(input, grads.input, [&] { return loss(net, input); });
  return out;
}

}  // namespace xtamer::testing
