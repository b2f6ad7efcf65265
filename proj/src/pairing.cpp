#include "rcml/pairing.hpp"

#include <algorithm>
#include <iostream>
#include <unordered_set>

namespace rcml {

std::size_t PairBatch::inter_pair_count() const {
    return static_cast<std::size_t>(std::count_if(positives.begin(), positives.end(),
                                                  [](const PositivePair& p) { return p.kind == PairKind::inter; }));
}

RelationEdge generic_intra_edge(SampleId id) { return RelationEdge{id, id, generic_intra_relation(), kIntraRelationType}; }

std::vector<PositivePair> build_positive_set(std::span<const Sample> samples, std::span<const RelationEdge> edges,
                                             bool include_intra, bool include_inter) {
    std::unordered_set<SampleId> known;
    for (const auto& s : samples) known.insert(s.id);
    for (const auto& e : edges) {
        for (SampleId id : {e.src, e.dst}) {
            if (!known.contains(id)) throw IntegrityError("edge references unknown sample id " + std::to_string(id));
        }
    }

    std::vector<PositivePair> out;
    if (include_intra) {
        for (const auto& s : samples) out.push_back({s.id, s.id, generic_intra_edge(s.id), PairKind::intra});
    }
    if (include_inter) {
        for (const auto& e : edges) {
            out.push_back({e.src, e.dst, e, PairKind::inter});
            RelationEdge reversed = e;
            std::swap(reversed.src, reversed.dst);
            out.push_back({e.dst, e.src, std::move(reversed), PairKind::inter});
        }
    }
    return out;
}

std::vector<SampleId> sample_negatives(std::span<const SampleId> roster, SampleId anchor,
                                       const std::set<SampleId>& excluded, std::optional<std::size_t> count, Rng& rng) {
    std::vector<SampleId> eligible;
    for (SampleId id : roster) {
        if (id != anchor && !excluded.contains(id)) eligible.push_back(id);
    }
    const std::size_t wanted = count.value_or(eligible.size());
    if (wanted == 0 || eligible.size() < wanted) {
        throw InsufficientNegatives("anchor " + std::to_string(anchor) + " has " + std::to_string(eligible.size()) +
                                    " eligible negatives, needs " + std::to_string(std::max<std::size_t>(wanted, 1)));
    }
    if (wanted == eligible.size()) return eligible;
    return rng.sample(std::span<const SampleId>(eligible), wanted);
}

void check_batch(const PairBatch& batch) {
    const std::set<SampleId> roster(batch.roster.begin(), batch.roster.end());
    std::map<SampleId, std::set<SampleId>> partners;
    for (const auto& p : batch.positives) {
        if (!roster.contains(p.anchor) || !roster.contains(p.partner)) {
            throw ContractError("positive pair references a sample outside the roster");
        }
        partners[p.anchor].insert(p.partner);
    }
    for (const auto& [anchor, negs] : batch.negatives) {
        for (SampleId k : negs) {
            if (!roster.contains(k)) throw ContractError("negative " + std::to_string(k) + " is not on the roster");
            if (k == anchor || partners[anchor].contains(k)) {
                throw ContractError("negative " + std::to_string(k) + " is paired with anchor " + std::to_string(anchor));
            }
        }
    }
}

BatchPlanner::BatchPlanner(std::span<const Sample> samples, std::span<const RelationEdge> train_edges,
                           PairingConfig config)
    : edges_(train_edges.begin(), train_edges.end()), config_(config) {
    if (config_.batch_size < 2) throw ConfigError("batch_size must be at least 2");
    if (!config_.include_intra && !config_.include_inter) {
        throw ConfigError("positive set is empty: both intra and inter pairs are disabled");
    }
    std::unordered_set<SampleId> known;
    for (const auto& s : samples) {
        ids_.push_back(s.id);
        known.insert(s.id);
    }
    if (ids_.size() < config_.batch_size) throw ConfigError("batch_size exceeds the number of samples");
    for (std::size_t i = 0; i < edges_.size(); ++i) {
        const auto& e = edges_[i];
        for (SampleId id : {e.src, e.dst}) {
            if (!known.contains(id)) throw IntegrityError("edge references unknown sample id " + std::to_string(id));
        }
        edges_by_sample_[e.src].push_back(i);
        if (e.dst != e.src) edges_by_sample_[e.dst].push_back(i);
        partners_[e.src].insert(e.dst);
        partners_[e.dst].insert(e.src);
    }
    if (config_.include_inter && edges_.empty()) throw ConfigError("inter-sample pairs requested but no edges given");
}

void BatchPlanner::fill_roster(std::vector<SampleId>& roster, Rng& rng) const {
    std::unordered_set<SampleId> present(roster.begin(), roster.end());
    while (roster.size() < config_.batch_size) {
        const SampleId id = ids_[rng.below(ids_.size())];
        if (present.insert(id).second) roster.push_back(id);
    }
}

std::vector<PairBatch> BatchPlanner::epoch(Rng& rng) const {
    std::vector<PairBatch> batches;
    if (!config_.include_inter) {
        const std::size_t per_pass = ids_.size() / config_.batch_size;
        const std::size_t wanted = config_.batches_per_epoch.value_or(per_pass);
        std::vector<SampleId> order;
        std::size_t start = 0;
        while (batches.size() < wanted) {
            if (order.empty() || start + config_.batch_size > order.size()) {
                order = ids_;
                rng.shuffle(order);
                start = 0;
            }
            std::vector<SampleId> roster(order.begin() + start, order.begin() + start + config_.batch_size);
            start += config_.batch_size;
            batches.push_back(make_batch(std::move(roster), rng));
        }
        return batches;
    }

    std::vector<std::size_t> order(edges_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);

    std::vector<SampleId> roster;
    std::unordered_set<SampleId> present;
    auto flush = [&] {
        if (roster.empty()) return;
        fill_roster(roster, rng);
        batches.push_back(make_batch(std::move(roster), rng));
        roster.clear();
        present.clear();
    };
    for (std::size_t idx : order) {
        const auto& e = edges_[idx];
        const std::size_t added = (present.contains(e.src) ? 0 : 1) + (present.contains(e.dst) ? 0 : 1);
        if (roster.size() + added > config_.batch_size) flush();
        for (SampleId id : {e.src, e.dst}) {
            if (present.insert(id).second) roster.push_back(id);
        }
        if (roster.size() == config_.batch_size) flush();
    }
    flush();
    return batches;
}

PairBatch BatchPlanner::make_batch(std::vector<SampleId> roster, Rng& rng) const {
    for (int attempt = 0;; ++attempt) {
        PairBatch batch;
        batch.rng_seed = rng.next_u64();
        Rng local(batch.rng_seed);
        batch.roster = roster;

        std::vector<Sample> members;
        members.reserve(roster.size());
        for (SampleId id : roster) members.push_back(Sample{id, {}, {}, 0});
        std::vector<RelationEdge> inside;
        if (config_.include_inter) {
            const std::unordered_set<SampleId> present(roster.begin(), roster.end());
            std::set<std::size_t> taken;
            for (SampleId id : roster) {
                auto it = edges_by_sample_.find(id);
                if (it == edges_by_sample_.end()) continue;
                for (std::size_t idx : it->second) {
                    const auto& e = edges_[idx];
                    if (present.contains(e.src) && present.contains(e.dst)) taken.insert(idx);
                }
            }
            for (std::size_t idx : taken) inside.push_back(edges_[idx]);
        }
        batch.positives = build_positive_set(members, inside, config_.include_intra, config_.include_inter);

        std::map<SampleId, std::set<SampleId>> excluded;
        for (const auto& p : batch.positives) excluded[p.anchor].insert(p.partner);
        std::vector<SampleId> failed;
        for (const auto& [anchor, partners] : excluded) {
            std::set<SampleId> skip = partners;
            if (auto it = partners_.find(anchor); it != partners_.end()) skip.insert(it->second.begin(), it->second.end());
            try {
                batch.negatives[anchor] = sample_negatives(batch.roster, anchor, skip, config_.negative_cap, local);
            } catch (const InsufficientNegatives&) {
                failed.push_back(anchor);
            }
        }
        if (failed.empty()) return batch;

        if (attempt >= 16) throw InsufficientNegatives("could not draw a batch with enough eligible negatives");
        ++redraws_;
        std::clog << "[pairing] re-drawing batch: anchor " << failed.front() << " lacks eligible negatives\n";
        std::vector<SampleId> kept;
        for (SampleId id : roster) {
            if (std::find(failed.begin(), failed.end(), id) == failed.end()) kept.push_back(id);
        }
        roster = std::move(kept);
        fill_roster(roster, rng);
    }
}

}  // namespace rcml
