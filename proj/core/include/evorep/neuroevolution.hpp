#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "evorep/dataset.hpp"
#include "evorep/neuralnet.hpp"

namespace evorep {

struct EvolveConfig {
  std::size_t cohort_size = 4;   // c
  std::size_t progenitors = 2;   // l, parents drawn from the top l
  std::size_t generations = 5;   // g
  Eigen::Index hidden_width = 20;  // m
  Eigen::Index head_width = 10;    // k
  /// Budget for fitting a fresh output layer onto a crossed-over hidden layer.
  std::size_t offspring_epochs = 30;
  TrainConfig candidate;  // outcome networks
  TrainConfig head;       // treatment heads used for fitness
  std::uint64_t seed = 0;
  /// Worker threads used to train candidates of one generation; results are
  /// identical for any value.
  std::size_t jobs = 1;

  std::size_t offspring_per_generation() const noexcept { return progenitors * (progenitors - 1) / 2; }
  void validate() const;
};

enum class Origin { fresh, elite, offspring };

std::string_view to_string(Origin origin) noexcept;

struct Provenance {
  Origin origin = Origin::fresh;
  /// Elite: its index in the previous generation. Offspring: the two parents'
  /// indices in the previous generation (rows start as parent_a's).
  std::size_t parent_a = 0;
  std::size_t parent_b = 0;
};

struct ScoredCandidate {
  OutcomeNetParams params;
  /// Validation squared error of the best treatment head; larger is fitter.
  double fitness = 0.0;
  /// Validation MSE of the outcome network itself.
  double outcome_mse = 0.0;
  Provenance provenance;
};

struct LineageRecord {
  std::size_t generation = 0;  // 1-based
  std::size_t index = 0;
  Provenance provenance;
  double fitness = 0.0;
  double outcome_mse = 0.0;
};

struct EvolveResult {
  RepresentationMap map;
  ScoredCandidate best;
  std::size_t best_index = 0;
  std::vector<std::vector<ScoredCandidate>> generations;
  std::vector<LineageRecord> lineage;
};

/// Trains a treatment head on phi_theta and returns its validation squared
/// error, the empirical fitness of theta.
double fitness(const OutcomeNetParams& theta, const Dataset& train, const Dataset& valid,
               const EvolveConfig& config, std::uint64_t seed);

/// Node-based crossover of the hidden layer: row r of the child's m1 and
/// entry r of b1 come jointly from parent_b where take_b[r] is true, else
/// from parent_a. The output layer is left zeroed.
OutcomeNetParams cross_hidden_layers(const OutcomeNetParams& parent_a, const OutcomeNetParams& parent_b,
                                     const std::vector<bool>& take_b);

/// One fair coin per hidden unit, then a fresh output layer fitted for
/// config.offspring_epochs epochs with the hidden layer frozen.
OutcomeNetParams crossover(const OutcomeNetParams& parent_a, const OutcomeNetParams& parent_b,
                           const Dataset& train, const Dataset& valid, const EvolveConfig& config,
                           Rng& rng);

/// Evolves a cohort of outcome networks and returns the representation of
/// the fittest member of the last generation, together with its lineage.
///
/// Generation 1 holds c freshly trained networks. Every later generation
/// holds the previous best (carried with its cached fitness), one offspring
/// per unordered pair of the previous top l, and fresh networks to fill up
/// to c. Ties in ranking go to the lower index.
EvolveResult evolve(const Dataset& train, const Dataset& valid, const EvolveConfig& config);

/// A single trained candidate with no fitness evaluation or crossover. It
/// is the same network evolve() trains as candidate 0 of generation 1.
RepresentationMap no_fitness_baseline(const Dataset& train, const Dataset& valid, const EvolveConfig& config);

/// One CSV record per candidate: generation,index,origin,parent_a,parent_b,fitness,outcome_mse.
void write_lineage(std::ostream& out, const std::vector<LineageRecord>& lineage);

}  // namespace evorep
