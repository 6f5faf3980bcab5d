#include "evorep/neuroevolution.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <numeric>
#include <ostream>
#include <thread>

#include "evorep/errors.hpp"
#include "evorep/text_io.hpp"

namespace evorep {

namespace {

// Seed streams; each candidate draws from (master, generation, index, purpose).
enum SeedPurpose : std::uint64_t { kTrain = 1, kHead = 2, kCrossover = 3, kRefine = 4 };

std::uint64_t candidate_seed(const EvolveConfig& config, std::size_t generation, std::size_t index,
                             SeedPurpose purpose) {
  return derive_seed(config.seed, generation, index, purpose);
}

OutcomeNetParams train_fresh(const Dataset& train, const Dataset& valid, const EvolveConfig& config,
                             std::size_t generation, std::size_t index, double* outcome_mse) {
  TrainConfig tc = config.candidate;
  tc.seed = candidate_seed(config, generation, index, kTrain);
  OutcomeFit fit = train_outcome(train, valid, config.hidden_width, tc);
  if (outcome_mse) *outcome_mse = fit.valid_mse;
  return std::move(fit.params);
}

// Runs body(i) for i in [0, count) on up to `jobs` threads. The first
// exception (lowest index) is rethrown after all workers finish.
template <class Body>
void parallel_for(std::size_t count, std::size_t jobs, Body body) {
  if (jobs <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  for (std::size_t t = 0; t < std::min(jobs, count); ++t) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          body(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& w : workers) w.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// Indices sorted by descending fitness, ties to the lower index.
std::vector<std::size_t> rank_by_fitness(const std::vector<ScoredCandidate>& cohort) {
  std::vector<std::size_t> order(cohort.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return cohort[a].fitness > cohort[b].fitness; });
  return order;
}

}  // namespace

std::string_view to_string(Origin origin) noexcept {
  switch (origin) {
    case Origin::fresh: return "fresh";
    case Origin::elite: return "elite";
    case Origin::offspring: return "offspring";
  }
  return "fresh";
}

void EvolveConfig::validate() const {
  if (progenitors < 2) throw ConfigError("progenitor count must be at least 2");
  if (cohort_size < 1 + offspring_per_generation()) {
    throw ConfigError("cohort size must be at least 1 + l(l-1)/2 = " +
                      std::to_string(1 + offspring_per_generation()));
  }
  if (progenitors > cohort_size) throw ConfigError("progenitor count exceeds cohort size");
  if (generations < 1) throw ConfigError("generation count must be at least 1");
  if (hidden_width < 1 || head_width < 1) throw ConfigError("hidden and head widths must be at least 1");
  if (jobs < 1) throw ConfigError("jobs must be at least 1");
  candidate.validate();
  head.validate();
}

double fitness(const OutcomeNetParams& theta, const Dataset& train, const Dataset& valid,
               const EvolveConfig& config, std::uint64_t seed) {
  TrainConfig tc = config.head;
  tc.seed = seed;
  const double score = train_treatment_head(theta, train, valid, config.head_width, tc).score;
  if (!std::isfinite(score)) throw TrainingError("fitness estimate is not finite");
  return score;
}

OutcomeNetParams cross_hidden_layers(const OutcomeNetParams& parent_a, const OutcomeNetParams& parent_b,
                                     const std::vector<bool>& take_b) {
  if (parent_a.m1.rows() != parent_b.m1.rows() || parent_a.m1.cols() != parent_b.m1.cols()) {
    throw DimensionError("crossover parents differ in shape");
  }
  if (static_cast<Eigen::Index>(take_b.size()) != parent_a.hidden_dim()) {
    throw DimensionError("crossover needs one coin per hidden unit");
  }
  OutcomeNetParams child = OutcomeNetParams::zeros(parent_a.input_dim(), parent_a.hidden_dim(), parent_a.activation);
  for (Eigen::Index r = 0; r < parent_a.hidden_dim(); ++r) {
    const OutcomeNetParams& src = take_b[static_cast<std::size_t>(r)] ? parent_b : parent_a;
    child.m1.row(r) = src.m1.row(r);
    child.b1[r] = src.b1[r];
  }
  return child;
}

OutcomeNetParams crossover(const OutcomeNetParams& parent_a, const OutcomeNetParams& parent_b,
                           const Dataset& train, const Dataset& valid, const EvolveConfig& config,
                           Rng& rng) {
  std::bernoulli_distribution coin(0.5);
  std::vector<bool> take_b(static_cast<std::size_t>(parent_a.hidden_dim()));
  for (std::size_t r = 0; r < take_b.size(); ++r) take_b[r] = coin(rng);
  const OutcomeNetParams child = cross_hidden_layers(parent_a, parent_b, take_b);

  TrainConfig tc = config.candidate;
  tc.max_epochs = config.offspring_epochs;
  tc.seed = rng();
  return refine_outcome(child, train, valid, tc, /*freeze_hidden=*/true, /*fresh_output=*/true).params;
}

EvolveResult evolve(const Dataset& train, const Dataset& valid, const EvolveConfig& config) {
  config.validate();
  if (train.cols() != valid.cols()) throw DimensionError("training and validation widths differ");

  const std::size_t c = config.cohort_size;
  EvolveResult result;

  // Generation 1: c independent candidates.
  std::vector<ScoredCandidate> cohort(c);
  parallel_for(c, config.jobs, [&](std::size_t j) {
    auto& cand = cohort[j];
    cand.params = train_fresh(train, valid, config, 1, j, &cand.outcome_mse);
    cand.provenance = Provenance{Origin::fresh, 0, 0};
    cand.fitness = fitness(cand.params, train, valid, config, candidate_seed(config, 1, j, kHead));
  });
  result.generations.push_back(cohort);

  for (std::size_t gen = 2; gen <= config.generations; ++gen) {
    const std::vector<ScoredCandidate>& previous = result.generations.back();
    const auto ranked = rank_by_fitness(previous);
    const std::size_t top = std::min(config.progenitors, previous.size());

    std::vector<ScoredCandidate> next(c);
    next[0] = previous[ranked[0]];
    next[0].provenance = Provenance{Origin::elite, ranked[0], ranked[0]};

    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t a = 0; a < top; ++a)
      for (std::size_t b = a + 1; b < top; ++b) pairs.emplace_back(ranked[a], ranked[b]);

    parallel_for(c - 1, config.jobs, [&](std::size_t slot) {
      const std::size_t j = slot + 1;
      auto& cand = next[j];
      if (slot < pairs.size()) {
        const auto [pa, pb] = pairs[slot];
        Rng rng(candidate_seed(config, gen, j, kCrossover));
        cand.params = crossover(previous[pa].params, previous[pb].params, train, valid, config, rng);
        cand.outcome_mse = (forward_outcome_rows(cand.params, valid.features()) - valid.outcome()).squaredNorm() /
                           static_cast<double>(valid.rows());
        cand.provenance = Provenance{Origin::offspring, pa, pb};
      } else {
        cand.params = train_fresh(train, valid, config, gen, j, &cand.outcome_mse);
        cand.provenance = Provenance{Origin::fresh, 0, 0};
      }
      cand.fitness = fitness(cand.params, train, valid, config, candidate_seed(config, gen, j, kHead));
    });
    result.generations.push_back(std::move(next));
  }

  for (std::size_t gen = 0; gen < result.generations.size(); ++gen) {
    const auto& cohort_t = result.generations[gen];
    for (std::size_t j = 0; j < cohort_t.size(); ++j) {
      result.lineage.push_back(LineageRecord{gen + 1, j, cohort_t[j].provenance, cohort_t[j].fitness,
                                             cohort_t[j].outcome_mse});
    }
  }

  const auto& final_cohort = result.generations.back();
  result.best_index = rank_by_fitness(final_cohort).front();
  result.best = final_cohort[result.best_index];
  result.map = result.best.params.representation_map();
  return result;
}

RepresentationMap no_fitness_baseline(const Dataset& train, const Dataset& valid, const EvolveConfig& config) {
  config.candidate.validate();
  if (config.hidden_width < 1) throw ConfigError("hidden width must be at least 1");
  return train_fresh(train, valid, config, 1, 0, nullptr).representation_map();
}

void write_lineage(std::ostream& out, const std::vector<LineageRecord>& lineage) {
  out << "generation,index,origin,parent_a,parent_b,fitness,outcome_mse\n";
  for (const auto& r : lineage) {
    out << r.generation << ',' << r.index << ',' << to_string(r.provenance.origin) << ',';
    if (r.provenance.origin == Origin::fresh) {
      out << ",";
    } else {
      out << r.provenance.parent_a << ',' << r.provenance.parent_b;
    }
    out << ',' << format_double(r.fitness) << ',' << format_double(r.outcome_mse) << '\n';
  }
}

}  // namespace evorep
