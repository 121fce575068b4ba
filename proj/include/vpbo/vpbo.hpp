#pragma once

#include <vector>

#include "vpbo/strategy.hpp"

namespace vpbo {

/// Best continuous point and its acquisition value for one combination.
struct ValueProposal {
  std::size_t combo = 0;
  Eigen::VectorXd x_star;
  double value = 0.0;
};

/// Maximises EI over `candidates` (all at category vector h). Ties go to the
/// lowest candidate index.
inline ValueProposal propose_from_candidates(const GPState& gp, std::size_t combo, const std::vector<int>& h,
                                             const std::vector<Eigen::VectorXd>& candidates, Incumbent incumbent,
                                             bool local_refine = false) {
  auto ei = [incumbent](double m, double v) { return expected_improvement(m, v, incumbent); };
  CandidateMax best = maximise_over(gp, h, candidates, ei);
  if (local_refine) best = refine_locally(gp, h, best, ei);
  return ValueProposal{combo, best.x, best.value};
}

/// Value proposal for combination `combo`: EI maximised over `n_samples`
/// uniform draws from `rng`.
inline ValueProposal propose_for_combination(const GPState& gp, const CategorySpace& space, std::size_t combo,
                                             Incumbent incumbent, int n_samples, Stream& rng) {
  const auto candidates = draw_candidates(n_samples, space.cont_dim(), rng);
  return propose_from_candidates(gp, combo, space.combo_vector(combo), candidates, incumbent);
}

/// argmax over proposal values; ties go to the lowest combination index.
inline const ValueProposal& select_proposal(const std::vector<ValueProposal>& proposals) {
  if (proposals.empty()) throw ContractError("cannot select from an empty proposal set");
  const ValueProposal* best = &proposals.front();
  for (const auto& p : proposals) {
    if (p.value > best->value || (p.value == best->value && p.combo < best->combo)) best = &p;
  }
  return *best;
}

/// Value-proposal BO: one EI proposal per categorical combination from a
/// single mixed-kernel GP, then the best proposal is queried.
class VpboStrategy : public StrategyBase {
public:
  explicit VpboStrategy(EngineOptions opt = {}, std::string name = "vpbo") : StrategyBase(std::move(name), std::move(opt)) {}

  const std::vector<ValueProposal>& last_proposals() const { return proposals_; }

protected:
  void on_initialised() override {
    combos_ = enumerate_combinations(space_, opt_.combo_cap);
    proposals_.clear();
  }

  Decision decide() override {
    Model m = refresh_model();
    const Incumbent inc{data_.best()};
    const auto t = static_cast<std::uint64_t>(t_);
    std::vector<ValueProposal> proposals;
    proposals.reserve(combos_.size());
    std::vector<Eigen::VectorXd> shared;
    if (opt_.share_candidates) {
      Stream s = stream("vpbo-candidates", {t});
      shared = draw_candidates(opt_.inner_samples, space_.cont_dim(), s);
    }
    for (std::size_t c = 0; c < combos_.size(); ++c) {
      if (opt_.share_candidates) {
        proposals.push_back(propose_from_candidates(m.gp, c, combos_[c], shared, inc, opt_.local_refine));
      } else {
        Stream s = stream("vpbo-candidates", {t, c});
        const auto cands = draw_candidates(opt_.inner_samples, space_.cont_dim(), s);
        proposals.push_back(propose_from_candidates(m.gp, c, combos_[c], cands, inc, opt_.local_refine));
      }
    }
    const ValueProposal& win = select_proposal(proposals);
    Decision d{MixedPoint{combos_[win.combo], win.x_star}, win.combo, std::move(m.gp), m.params, m.hyperopt};
    pending_ = std::move(proposals);
    return d;
  }

  void after_query(const Decision&, double) override { proposals_ = std::move(pending_); }

private:
  std::vector<std::vector<int>> combos_;
  std::vector<ValueProposal> proposals_;
  std::vector<ValueProposal> pending_;
};

} // namespace vpbo
