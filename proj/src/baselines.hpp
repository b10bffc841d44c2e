#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "core.hpp"
#include "shard_index.hpp"

namespace fairsync {

// regularized-fair dual variable: (mu_r)_g = lambda * (e_g - min_g' e_g').
DualVector regfair_mu(const ExposureLedger& ledger, double lambda);

// Inverse-propensity bonus: (mu_w)_g = -lambda / (e_g + 1). Lower cumulative
// exposure earns a larger distance discount.
DualVector ipw_mu(const ExposureLedger& ledger, double lambda);

// The k groups with the lowest cumulative exposure, ties to the lowest id;
// all groups when |G| <= k.
std::vector<int> kneighbor_allowed_groups(const ExposureLedger& ledger, int k);

// Groups whose cumulative exposure is still below their requirement.
std::vector<int> uncalibrated_unsatisfied_groups(const ExposureLedger& ledger,
                                                 const FairnessSpec& spec);

// Exact top-k restricted to allowed groups; when the filtered pool is smaller
// than k the remainder is filled from disallowed groups by best score and
// counted in *fallback_fills.
CandidateList retrieve_filtered(const Embedding& e_u, std::span<const ShardIndex> shards,
                                int k, const std::vector<int>& allowed_groups,
                                std::int64_t* fallback_fills);

CandidateList retrieve_regularized_fair(const Embedding& e_u, const ExposureLedger& ledger,
                                        double lambda, std::span<const ShardIndex> shards,
                                        int k);

CandidateList retrieve_ipw(const Embedding& e_u, const ExposureLedger& ledger,
                           double lambda, std::span<const ShardIndex> shards, int k);

CandidateList retrieve_k_neighbor(const Embedding& e_u, const ExposureLedger& ledger,
                                  std::span<const ShardIndex> shards, int k,
                                  std::int64_t* fallback_fills = nullptr);

CandidateList retrieve_uncalibrated(const Embedding& e_u, const ExposureLedger& ledger,
                                    const FairnessSpec& spec,
                                    std::span<const ShardIndex> shards, int k,
                                    std::int64_t* fallback_fills = nullptr);

}  // namespace fairsync
