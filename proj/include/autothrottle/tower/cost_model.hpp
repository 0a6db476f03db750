#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <vector>

#include "autothrottle/tower/actions.hpp"
#include "autothrottle/tower/cost.hpp"
#include "autothrottle/tower/sample_store.hpp"

namespace autothrottle::tower {

// Per-action cost regression over the RPS context.
//
// The context enters either as a one-hot bin indicator or as the scalar
// bin * bin_size / context_scale_rps.
//
// Neural: a shared hidden layer of tanh units over the context feeds one linear
// output head per action. Linear: each head is bias + weight . context, so with
// one-hot context a (bin, action) pair never trained falls back to the action's
// bias. Trained with AdaGrad-scaled SGD on squared loss; accumulators persist
// across updates so the model keeps learning online. Heads start at zero, so
// actions never observed predict a cost of 0.
class CostModel {
 public:
  CostModel(ModelKind kind, ContextEncoding encoding, int hidden_units, double learning_rate, double bin_size,
            double context_scale_rps, std::uint64_t seed)
      : kind_(kind),
        encoding_(encoding),
        hidden_(kind == ModelKind::kNeural ? hidden_units : 1),
        lr_(learning_rate),
        bin_size_(bin_size),
        scale_(context_scale_rps) {
    if (hidden_ < 1 || hidden_ > kMaxHidden) throw ConfigError("tower.hidden_units: must be in [1, 16]");
    const auto h = static_cast<std::size_t>(hidden_);
    in_w_.assign(h, 0.0);
    in_b_.assign(h, 0.0);
    in_w_g_.assign(h, 0.0);
    in_b_g_.assign(h, 0.0);
    head_b_.assign(kNumActions, 0.0);
    head_b_g_.assign(kNumActions, 0.0);
    head_w_.assign(kNumActions * h, 0.0);
    head_w_g_.assign(kNumActions * h, 0.0);
    if (kind_ == ModelKind::kNeural) {
      std::mt19937_64 rng(seed);
      std::uniform_real_distribution<double> init(-1.0, 1.0);
      for (std::size_t k = 0; k < h; ++k) {
        in_w_[k] = 2.0 * init(rng);
        in_b_[k] = init(rng);
      }
    }
  }

  explicit CostModel(const TowerParams& p)
      : CostModel(p.model, p.encoding, p.hidden_units, p.learning_rate, p.bin_size, p.context_scale_rps, p.seed) {}

  ModelKind kind() const noexcept { return kind_; }
  ContextEncoding encoding() const noexcept { return encoding_; }

  // Scalar context feature (unused by the one-hot encoding).
  double feature(ContextBin bin) const noexcept { return static_cast<double>(bin) * bin_size_ / scale_; }

  double predict(ContextBin bin, ActionPair action) const {
    const Context c = context(bin);
    return output(action.index(), c);
  }

  void train(std::span<const TrainingSample> samples) {
    for (const auto& s : samples) {
      BinWeights* bw = encoding_ != ContextEncoding::kScalar ? &bin_weights(s.bin) : nullptr;
      const Context c = context(s.bin);
      const int a = s.action.index();
      const double g = output(a, c) - s.cost;
      adagrad(head_b_[a], head_b_g_[a], g);
      if (kind_ == ModelKind::kLinear) {
        if (bw) adagrad(bw->head[a], bw->head_g[a], g);
        if (uses_x()) adagrad(head_w_[a], head_w_g_[a], g * c.x);
        continue;
      }
      for (int k = 0; k < hidden_; ++k) {
        const auto wi = static_cast<std::size_t>(a * hidden_ + k);
        const double dh = g * head_w_[wi] * (1.0 - c.h[k] * c.h[k]);
        adagrad(head_w_[wi], head_w_g_[wi], g * c.h[k]);
        if (bw) adagrad(bw->in[k], bw->in_g[k], dh);
        if (uses_x()) adagrad(in_w_[k], in_w_g_[k], dh * c.x);
        adagrad(in_b_[k], in_b_g_[k], dh);
      }
    }
  }

  // Argmin of predicted cost; ties go to the larger i + j (higher targets,
  // fewer cores), then to the larger i.
  ActionPair best_action(ContextBin bin) const {
    const Context c = context(bin);
    ActionPair best = ActionPair::from_index(0);
    double best_cost = output(0, c);
    for (int a = 1; a < kNumActions; ++a) {
      const double cost = output(a, c);
      const ActionPair cand = ActionPair::from_index(a);
      const bool tie = std::abs(cost - best_cost) <= 1e-12;
      if ((!tie && cost < best_cost) ||
          (tie && (cand.i + cand.j > best.i + best.j || (cand.i + cand.j == best.i + best.j && cand.i > best.i)))) {
        best = cand;
        best_cost = cost;
      }
    }
    return best;
  }

  ActionPair train_and_predict(std::span<const TrainingSample> samples, ContextBin bin) {
    train(samples);
    return best_action(bin);
  }

 private:
  static constexpr int kMaxHidden = 16;

  // One-hot weights of a single bin: hidden-unit inputs (neural) or per-action
  // head weights (linear). They start at zero, so an unseen bin falls back to
  // the shared weights.
  struct BinWeights {
    std::array<double, kMaxHidden> in{}, in_g{};
    std::array<double, kNumActions> head{}, head_g{};
  };

  struct Context {
    double x = 0.0;
    const BinWeights* bin = nullptr;
    std::array<double, kMaxHidden> h{};
  };

  BinWeights& bin_weights(ContextBin bin) { return bins_[bin]; }

  bool uses_x() const noexcept { return encoding_ != ContextEncoding::kOneHot; }

  Context context(ContextBin bin) const {
    Context c;
    if (uses_x()) c.x = feature(bin);
    if (encoding_ != ContextEncoding::kScalar) {
      const auto it = bins_.find(bin);
      c.bin = it != bins_.end() ? &it->second : &unseen_;
    }
    if (kind_ == ModelKind::kNeural)
      for (int k = 0; k < hidden_; ++k) c.h[k] = std::tanh(in_w_[k] * c.x + (c.bin ? c.bin->in[k] : 0.0) + in_b_[k]);
    return c;
  }

  double output(int a, const Context& c) const {
    if (kind_ == ModelKind::kLinear) return head_b_[a] + head_w_[a] * c.x + (c.bin ? c.bin->head[a] : 0.0);
    double out = head_b_[a];
    for (int k = 0; k < hidden_; ++k) out += head_w_[static_cast<std::size_t>(a * hidden_ + k)] * c.h[k];
    return out;
  }

  void adagrad(double& w, double& acc, double grad) const {
    acc += grad * grad;
    if (acc > 0.0) w -= lr_ * grad / std::sqrt(acc);
  }

  ModelKind kind_;
  ContextEncoding encoding_;
  int hidden_;
  double lr_;
  double bin_size_;
  double scale_;
  std::vector<double> in_w_, in_b_, in_w_g_, in_b_g_;
  std::vector<double> head_b_, head_b_g_, head_w_, head_w_g_;
  std::map<ContextBin, BinWeights> bins_;
  BinWeights unseen_{};
};

}  // namespace autothrottle::tower
