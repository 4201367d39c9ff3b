#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "locpriv/errors.hpp"
#include "locpriv/matrix.hpp"
#include "locpriv/rng.hpp"

namespace locpriv {

// ---------------------------------------------------------------------------
// Timestamps
// ---------------------------------------------------------------------------

struct DateTime {
  int year = 2011;
  int month = 1;
  int day = 1;
  int hour = 0;
  int minute = 0;
  int second = 0;

  friend bool operator==(const DateTime&, const DateTime&) = default;
};

// "YYYY-MM-DDTHH:MM:SS"; a space separator is accepted in place of 'T'.
inline DateTime parse_iso8601(const std::string& text) {
  DateTime dt;
  char sep = 0;
  const int got =
      std::sscanf(text.c_str(), "%4d-%2d-%2d%c%2d:%2d:%2d", &dt.year,
                  &dt.month, &dt.day, &sep, &dt.hour, &dt.minute, &dt.second);
  const bool shape_ok = got == 7 && (sep == 'T' || sep == ' ');
  const bool range_ok = dt.month >= 1 && dt.month <= 12 && dt.day >= 1 &&
                        dt.day <= 31 && dt.hour >= 0 && dt.hour <= 23 &&
                        dt.minute >= 0 && dt.minute <= 59 && dt.second >= 0 &&
                        dt.second <= 59;
  if (!shape_ok || !range_ok)
    throw std::invalid_argument("unparseable timestamp: '" + text + "'");
  return dt;
}

inline std::string format_iso8601(const DateTime& dt) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d", dt.year,
                dt.month, dt.day, dt.hour, dt.minute, dt.second);
  return buf;
}

// ---------------------------------------------------------------------------
// Categories and items
// ---------------------------------------------------------------------------

enum class Category : std::uint8_t {
  food_and_drink = 0,
  leisure,
  retail,
  residential,
  academic,
  library,
};

inline constexpr std::size_t kCategoryCount = 6;

inline const char* category_name(Category c) {
  static constexpr std::array<const char*, kCategoryCount> names = {
      "Food and Drink", "Leisure", "Retail", "Residential", "Academic",
      "Library"};
  return names[static_cast<std::size_t>(c)];
}

inline Category parse_category(const std::string& name) {
  for (std::size_t c = 0; c < kCategoryCount; ++c)
    if (name == category_name(static_cast<Category>(c)))
      return static_cast<Category>(c);
  throw mapping_error("'" + name + "' is not a unified category");
}

// Maps trajectory-corpus vocabulary onto the unified preference vocabulary.
// Community splits by subcategory; everything else maps directly.
inline Category unify_category(const std::string& category,
                               const std::string& subcategory = "") {
  if (category == "Community") {
    if (subcategory == "Home") return Category::residential;
    if (subcategory == "Library") return Category::library;
    return Category::academic;
  }
  if (category == "Entertainment") return Category::leisure;
  if (category == "Food") return Category::food_and_drink;
  if (category == "Nightlife") return Category::food_and_drink;
  if (category == "Outdoors") return Category::leisure;
  if (category == "Shopping") return Category::retail;
  if (category == "Travel") return Category::leisure;
  throw mapping_error("unknown source category '" + category + "'");
}

inline int slot_count(int granularity) {
  switch (granularity) {
    case 2: case 3: case 4: case 6: case 8: case 12:
      return 24 / granularity;
    default:
      throw std::invalid_argument(
          "time granularity must be one of {2, 3, 4, 6, 8, 12}, got " +
          std::to_string(granularity));
  }
}

// Hour-of-day discretization; date and weekday are discarded.
inline std::size_t slotify(const DateTime& dt, int granularity) {
  slot_count(granularity);
  return static_cast<std::size_t>(dt.hour / granularity);
}

// One recommendation item: a (time slot, place category) pair.
struct ItemKey {
  std::size_t slot = 0;
  Category category = Category::food_and_drink;

  friend bool operator==(const ItemKey&, const ItemKey&) = default;
};

inline std::string item_label(const ItemKey& key) {
  return "slot" + std::to_string(key.slot) + ":" +
         category_name(key.category);
}

inline std::size_t item_index(std::size_t slot, Category category) {
  return slot * kCategoryCount + static_cast<std::size_t>(category);
}

// Full cross product, slot-major then category in enum order.
inline std::vector<ItemKey> build_items(int granularity) {
  const int slots = slot_count(granularity);
  std::vector<ItemKey> items;
  items.reserve(static_cast<std::size_t>(slots) * kCategoryCount);
  for (int s = 0; s < slots; ++s)
    for (std::size_t c = 0; c < kCategoryCount; ++c)
      items.push_back({static_cast<std::size_t>(s), static_cast<Category>(c)});
  return items;
}

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

struct CheckinRecord {
  std::string user_id;
  DateTime timestamp;
  std::string place_id;
  std::string category;     // trajectory-corpus vocabulary
  std::string subcategory;  // may be empty

  friend bool operator==(const CheckinRecord&, const CheckinRecord&) = default;
};

struct PreferenceRecord {
  std::string user_id;
  DateTime timestamp;
  std::string place_id;
  Category category;  // unified vocabulary
  std::uint8_t rating = 0;

  friend bool operator==(const PreferenceRecord&,
                         const PreferenceRecord&) = default;
};

struct Corpus {
  std::vector<CheckinRecord> checkins;
  std::vector<PreferenceRecord> prefs;
};

// Keeps only check-ins at places visited by at least two distinct users.
// Input order is preserved.
inline std::vector<CheckinRecord> filter_trajectory(
    const std::vector<CheckinRecord>& records) {
  std::unordered_map<std::string, std::unordered_set<std::string>> visitors;
  for (const CheckinRecord& r : records) visitors[r.place_id].insert(r.user_id);
  std::vector<CheckinRecord> kept;
  kept.reserve(records.size());
  for (const CheckinRecord& r : records)
    if (visitors[r.place_id].size() >= 2) kept.push_back(r);
  return kept;
}

// ---------------------------------------------------------------------------
// Preference profiles and user sets
// ---------------------------------------------------------------------------

// One preference-corpus user's ratings discretized to the item grid. When a
// user has several records landing on the same item, the first record in
// input order wins.
struct PrefProfile {
  std::string user_id;
  std::vector<std::optional<std::uint8_t>> ratings;  // size n_items
  std::vector<std::size_t> rated_items;              // ascending
};

inline std::vector<PrefProfile> build_pref_profiles(
    const std::vector<PreferenceRecord>& records, int granularity) {
  const std::size_t n_items =
      static_cast<std::size_t>(slot_count(granularity)) * kCategoryCount;
  std::vector<PrefProfile> profiles;
  std::unordered_map<std::string, std::size_t> index;
  for (const PreferenceRecord& r : records) {
    auto [it, inserted] = index.try_emplace(r.user_id, profiles.size());
    if (inserted) {
      profiles.push_back({r.user_id,
                          std::vector<std::optional<std::uint8_t>>(n_items),
                          {}});
    }
    PrefProfile& p = profiles[it->second];
    const std::size_t item =
        item_index(slotify(r.timestamp, granularity), r.category);
    if (!p.ratings[item].has_value()) p.ratings[item] = r.rating;
  }
  for (PrefProfile& p : profiles)
    for (std::size_t j = 0; j < n_items; ++j)
      if (p.ratings[j].has_value()) p.rated_items.push_back(j);
  return profiles;
}

// A group of preference users whose combined ratings cover every item.
struct UserSet {
  std::vector<std::size_t> members;  // profile indices, in draw order
  std::vector<std::string> member_ids;
  std::vector<std::uint8_t> covered;  // per-item coverage bitmap
};

// Greedy randomized construction: sample users without replacement until the
// set covers all items; the pool restarts for each set. Fails up front when
// even the union of all users misses an item.
inline std::vector<UserSet> build_user_sets(
    const std::vector<PrefProfile>& profiles,
    const std::vector<ItemKey>& items, std::size_t count, Rng& rng) {
  const std::size_t n_items = items.size();
  std::vector<std::uint8_t> reachable(n_items, 0);
  for (const PrefProfile& p : profiles)
    for (std::size_t j : p.rated_items) reachable[j] = 1;
  std::string missing;
  for (std::size_t j = 0; j < n_items; ++j)
    if (!reachable[j]) {
      if (!missing.empty()) missing += ", ";
      missing += item_label(items[j]);
    }
  if (!missing.empty())
    throw coverage_error("no user rates: " + missing);

  std::vector<UserSet> sets;
  sets.reserve(count);
  std::vector<std::size_t> pool(profiles.size());
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
  for (std::size_t s = 0; s < count; ++s) {
    rng.shuffle(pool);
    UserSet set;
    set.covered.assign(n_items, 0);
    std::size_t n_covered = 0;
    for (std::size_t idx : pool) {
      set.members.push_back(idx);
      set.member_ids.push_back(profiles[idx].user_id);
      for (std::size_t j : profiles[idx].rated_items) {
        if (!set.covered[j]) {
          set.covered[j] = 1;
          ++n_covered;
        }
      }
      if (n_covered == n_items) break;
    }
    sets.push_back(std::move(set));
  }
  return sets;
}

// ---------------------------------------------------------------------------
// Trajectory visits and the merge
// ---------------------------------------------------------------------------

struct TrajProfile {
  std::string user_id;
  std::vector<std::size_t> visited;  // ascending item indices
};

// Users in first-appearance order over `user_source`; visit sets computed
// from `visit_source` (the filtered records in the real pipeline, so a user
// whose every check-in was filtered out keeps an empty row).
inline std::vector<TrajProfile> build_visit_profiles(
    const std::vector<CheckinRecord>& user_source,
    const std::vector<CheckinRecord>& visit_source, int granularity) {
  std::vector<TrajProfile> profiles;
  std::unordered_map<std::string, std::size_t> index;
  for (const CheckinRecord& r : user_source) {
    auto [it, inserted] = index.try_emplace(r.user_id, profiles.size());
    if (inserted) profiles.push_back({r.user_id, {}});
  }
  std::vector<std::set<std::size_t>> visits(profiles.size());
  for (const CheckinRecord& r : visit_source) {
    const auto it = index.find(r.user_id);
    if (it == index.end()) continue;
    const Category cat = unify_category(r.category, r.subcategory);
    visits[it->second].insert(
        item_index(slotify(r.timestamp, granularity), cat));
  }
  for (std::size_t i = 0; i < profiles.size(); ++i)
    profiles[i].visited.assign(visits[i].begin(), visits[i].end());
  return profiles;
}

struct BuiltDataset {
  PreferenceMatrix matrix;
  std::vector<std::string> user_ids;
  std::vector<ItemKey> items;
};

// Assigns every trajectory user one uniformly chosen user set and reads the
// rating of each visited item from the first set member (in draw order) who
// rated it. Observations sit exactly on the visited items.
inline PreferenceMatrix merge(const std::vector<TrajProfile>& trajectories,
                              const std::vector<UserSet>& user_sets,
                              const std::vector<PrefProfile>& profiles,
                              std::size_t n_items, Rng& rng) {
  if (user_sets.empty()) throw std::invalid_argument("merge: no user sets");
  std::vector<Rating> entries;
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    const UserSet& set = user_sets[rng.uniform_index(user_sets.size())];
    for (std::size_t j : trajectories[i].visited) {
      for (std::size_t member : set.members) {
        if (profiles[member].ratings[j].has_value()) {
          entries.push_back(
              {i, j, static_cast<double>(*profiles[member].ratings[j])});
          break;
        }
      }
    }
  }
  return PreferenceMatrix(trajectories.size(), n_items, std::move(entries));
}

// Full preprocessing chain: trajectory filter, discretization, category
// unification, item grid, user sets, merge.
inline BuiltDataset build_dataset(const Corpus& corpus, int granularity,
                                  std::size_t n_user_sets,
                                  std::uint64_t seed) {
  if (corpus.checkins.empty())
    throw empty_data_error("corpus has no check-in records");
  if (corpus.prefs.empty())
    throw empty_data_error("corpus has no preference records");
  const auto items = build_items(granularity);
  const auto filtered = filter_trajectory(corpus.checkins);
  const auto profiles = build_pref_profiles(corpus.prefs, granularity);
  Rng rng_sets(derive_seed(seed, 0x5e75));
  const auto sets = build_user_sets(profiles, items, n_user_sets, rng_sets);
  const auto traj =
      build_visit_profiles(corpus.checkins, filtered, granularity);
  Rng rng_merge(derive_seed(seed, 0x6d65));
  PreferenceMatrix matrix = merge(traj, sets, profiles, items.size(),
                                  rng_merge);
  std::vector<std::string> ids;
  ids.reserve(traj.size());
  for (const TrajProfile& t : traj) ids.push_back(t.user_id);
  return BuiltDataset{std::move(matrix), std::move(ids), items};
}

// ---------------------------------------------------------------------------
// Synthetic corpus
// ---------------------------------------------------------------------------

// The real corpora are unavailable, so experiments run on generated records
// in the same schemas. Preferences come from a rank-2 latent model whose
// ground truth varies at 6-hour blocks: user vectors cluster around a few
// archetypes and the rating bit is the sign of a.(q_block + s_category).
// Adjacent 6-hour blocks have opposing block effects, so a 12-hour item
// mixes conflicting truths while a 2- or 3-hour grid only thins the data.
struct SynthParams {
  std::size_t m_users = 100;  // trajectory users
  int granularity = 6;        // visit grid resolution
  double density = 0.6;       // per-item visit probability
  std::uint64_t seed = 1;
  std::size_t pref_users = 40;
  double pref_coverage = 0.9;  // per (hour, category) record probability
  std::size_t archetypes = 3;
  double jitter = 0.15;
  double solo_place_rate = 0.02;  // check-ins at single-visitor places
};

namespace synth_detail {

inline constexpr std::array<std::array<double, 2>, 5> kArchetypes = {{
    {1.0, 0.25}, {-0.8, 0.6}, {0.15, -1.0}, {0.7, -0.6}, {-0.5, -0.9}}};

inline constexpr std::array<std::array<double, 2>, 4> kBlockEffect = {{
    {0.9, 0.1}, {-0.9, 0.1}, {0.7, -0.2}, {-0.7, -0.2}}};

inline std::array<double, 2> category_effect(std::size_t c) {
  const double angle = 6.283185307179586 * static_cast<double>(c) / 6.0 + 0.4;
  return {0.8 * std::cos(angle), 0.8 * std::sin(angle)};
}

inline std::uint8_t truth_bit(const std::array<double, 2>& latent, int hour,
                              std::size_t category) {
  const auto& q = kBlockEffect[static_cast<std::size_t>(hour / 6)];
  const auto s = category_effect(category);
  const double score =
      latent[0] * (q[0] + s[0]) + latent[1] * (q[1] + s[1]);
  return score >= 0.0 ? 1 : 0;
}

inline std::array<double, 2> draw_latent(const SynthParams& params,
                                         Rng& rng) {
  const std::size_t n_arch =
      std::min(params.archetypes, kArchetypes.size());
  const auto& base = kArchetypes[rng.uniform_index(n_arch)];
  return {base[0] + params.jitter * rng.normal(),
          base[1] + params.jitter * rng.normal()};
}

// Source-vocabulary spellings of each unified category, so generated
// check-ins exercise the unification step.
inline std::pair<std::string, std::string> source_vocabulary(
    Category c, Rng& rng) {
  switch (c) {
    case Category::food_and_drink:
      return rng.bernoulli(0.7) ? std::pair<std::string, std::string>{"Food",
                                                                      ""}
                                : std::pair<std::string, std::string>{
                                      "Nightlife", ""};
    case Category::leisure: {
      const std::size_t pick = rng.uniform_index(3);
      if (pick == 0) return {"Entertainment", ""};
      if (pick == 1) return {"Outdoors", ""};
      return {"Travel", ""};
    }
    case Category::retail:
      return {"Shopping", ""};
    case Category::residential:
      return {"Community", "Home"};
    case Category::academic:
      return rng.bernoulli(0.5)
                 ? std::pair<std::string, std::string>{"Community",
                                                       "University"}
                 : std::pair<std::string, std::string>{"Community", "Park"};
    case Category::library:
      return {"Community", "Library"};
  }
  return {"Food", ""};
}

}  // namespace synth_detail

inline Corpus synth_generate(const SynthParams& params) {
  if (params.m_users == 0)
    throw empty_data_error("synthetic corpus needs at least one user");
  if (params.pref_users == 0)
    throw empty_data_error("synthetic corpus needs preference users");
  if (!(params.density > 0.0 && params.density <= 1.0))
    throw std::invalid_argument("density must be in (0, 1]");
  if (!(params.pref_coverage > 0.0 && params.pref_coverage <= 1.0))
    throw std::invalid_argument("pref_coverage must be in (0, 1]");
  const int slots = slot_count(params.granularity);

  Corpus corpus;
  Rng rng(derive_seed(params.seed, 0x5941));

  // Preference corpus: per user one record per (hour, category) cell kept
  // with probability pref_coverage, emitted in shuffled order so that the
  // first record landing on a coarse item is not biased toward low hours.
  for (std::size_t p = 0; p < params.pref_users; ++p) {
    const auto latent = synth_detail::draw_latent(params, rng);
    std::vector<PreferenceRecord> mine;
    for (int hour = 0; hour < 24; ++hour) {
      for (std::size_t c = 0; c < kCategoryCount; ++c) {
        if (!rng.bernoulli(params.pref_coverage)) continue;
        PreferenceRecord rec;
        rec.user_id = "p" + std::to_string(p);
        rec.timestamp = {2011, 4, 23 + static_cast<int>(rng.uniform_index(7)),
                         hour, static_cast<int>(rng.uniform_index(60)), 0};
        rec.place_id =
            "L" + std::to_string(c) + "_" + std::to_string(hour);
        rec.category = static_cast<Category>(c);
        rec.rating = synth_detail::truth_bit(latent, hour, c);
        mine.push_back(std::move(rec));
      }
    }
    rng.shuffle(mine);
    for (auto& rec : mine) corpus.prefs.push_back(std::move(rec));
  }

  // Trajectory corpus: visits on the (slot, category) grid with mild
  // per-user habit weighting. density = 1 visits every cell.
  for (std::size_t u = 0; u < params.m_users; ++u) {
    const auto latent = synth_detail::draw_latent(params, rng);
    std::size_t solo_counter = 0;
    for (int s = 0; s < slots; ++s) {
      for (std::size_t c = 0; c < kCategoryCount; ++c) {
        const auto qs = synth_detail::category_effect(c);
        const auto& qb =
            synth_detail::kBlockEffect[static_cast<std::size_t>(
                s * params.granularity / 6) % 4];
        const double affinity =
            latent[0] * (qb[0] + qs[0]) + latent[1] * (qb[1] + qs[1]);
        const double weight = 1.0 + 0.5 * std::tanh(affinity);
        const double p_visit =
            params.density >= 1.0 ? 1.0 : std::pow(params.density, 1.0 / weight);
        if (!rng.bernoulli(p_visit)) continue;
        CheckinRecord rec;
        rec.user_id = "t" + std::to_string(u);
        const int hour = s * params.granularity +
                         static_cast<int>(rng.uniform_index(
                             static_cast<std::size_t>(params.granularity)));
        rec.timestamp = {2011, 4, 1 + static_cast<int>(rng.uniform_index(28)),
                         hour, static_cast<int>(rng.uniform_index(60)), 0};
        if (rng.bernoulli(params.solo_place_rate)) {
          rec.place_id = "S" + std::to_string(u) + "_" +
                         std::to_string(solo_counter++);
        } else {
          rec.place_id = "P" + std::to_string(c) + "_" +
                         std::to_string(rng.uniform_index(12));
        }
        const auto vocab =
            synth_detail::source_vocabulary(static_cast<Category>(c), rng);
        rec.category = vocab.first;
        rec.subcategory = vocab.second;
        corpus.checkins.push_back(std::move(rec));
      }
    }
  }
  return corpus;
}

}  // namespace locpriv
