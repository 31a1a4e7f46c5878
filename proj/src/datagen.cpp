#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "planest/nn.hpp"
#include "planest/trainer.hpp"

namespace planest {

namespace {

const char* kAdjectives[] = {"amber",  "brisk",  "cedar",  "dusty",
                             "eager",  "frosty", "gilded", "hollow",
                             "ivory",  "jagged", "kindled", "lunar",
                             "mellow", "noble",  "ochre",  "placid"};

const char* kNouns[] = {"anchor", "beacon", "canyon", "delta",
                        "ember",  "fjord",  "grove",  "harbor",
                        "inlet",  "juniper", "knoll",  "lagoon",
                        "meadow", "nectar", "orchard", "prairie"};

// Tag vocabulary built from base words and their reversals. A reversal keeps
// the character multiset, so hash signatures cannot separate the pair even
// though the two tags have very different frequencies.
const char* kTagBases[] = {"stream", "carbon", "dental", "silver",
                           "planet", "marble", "copper", "violet"};

// Low index = high probability; roughly zipfian.
size_t skewed_index(std::mt19937_64& rng, size_t n) {
  double u = unit_uniform(rng);
  return std::min(n - 1, static_cast<size_t>(u * u * static_cast<double>(n)));
}

double gaussian(std::mt19937_64& rng) {
  // Box-Muller on the portable uniform.
  double u1 = std::max(unit_uniform(rng), 1e-12);
  double u2 = unit_uniform(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::string make_stamp(std::mt19937_64& rng) {
  int year = 1990 + static_cast<int>(unit_uniform(rng) * 30);
  int month = 1 + static_cast<int>(unit_uniform(rng) * 12);
  int day = 1 + static_cast<int>(unit_uniform(rng) * 28);
  char buf[16];
  std::snprintf(buf, sizeof buf, "(%04d-%02d-%02d)", year, month, day);
  return buf;
}

}  // namespace

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty())
    throw data_error("pearson needs two equal nonempty vectors");
  double ma = 0, mb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= a.size();
  mb /= b.size();
  double sab = 0, saa = 0, sbb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0 || sbb == 0) return 0;
  return sab / std::sqrt(saa * sbb);
}

std::vector<IndexInfo> default_indexes() {
  return {{"items_pk", "items.id"},
          {"events_pk", "events.id"},
          {"events_item_fk", "events.item_id"}};
}

Dataset generate_dataset(const DatasetConfig& cfg) {
  Dataset ds;
  std::mt19937_64 rng(cfg.seed);

  const int n = cfg.rows_main;
  Table items;
  items.name = "items";
  items.rows = static_cast<uint64_t>(n);
  Column id_col{ColType::Numeric, {}, {}};
  Column val_a{ColType::Numeric, {}, {}};
  Column val_b{ColType::Numeric, {}, {}};
  Column val_c{ColType::Numeric, {}, {}};
  Column name_col{ColType::Str, {}, {}};
  Column tag_col{ColType::Str, {}, {}};
  Column stamp_col{ColType::Str, {}, {}};

  // val_b = val_a + gaussian noise sized so the Pearson coefficient lands
  // near cfg.correlation.
  double rho = std::clamp(cfg.correlation, 0.05, 0.999);
  double sigma_a = 999.0 / std::sqrt(12.0);
  double sigma_n = sigma_a * std::sqrt(1.0 / (rho * rho) - 1.0);

  const size_t n_tags = sizeof(kTagBases) / sizeof(kTagBases[0]);
  std::vector<std::string> tags;
  for (size_t i = 0; i < n_tags; ++i) {
    tags.emplace_back(kTagBases[i]);
    std::string rev(tags.back().rbegin(), tags.back().rend());
    tags.push_back(std::move(rev));
  }

  for (int i = 0; i < n; ++i) {
    id_col.nums.push_back(i + 1);
    double a = std::floor(unit_uniform(rng) * 1000.0);
    double b = std::clamp(std::round(a + gaussian(rng) * sigma_n), 0.0, 999.0);
    val_a.nums.push_back(a);
    val_b.nums.push_back(b);
    val_c.nums.push_back(std::floor(unit_uniform(rng) * 1000.0));
    name_col.strs.push_back(
        std::string(kAdjectives[skewed_index(rng, 16)]) + " " +
        kNouns[skewed_index(rng, 16)]);
    // Base word with probability ~0.9, reversed twin otherwise.
    size_t base = skewed_index(rng, n_tags);
    bool reversed = unit_uniform(rng) < 0.1;
    tag_col.strs.push_back(tags[base * 2 + (reversed ? 1 : 0)]);
    stamp_col.strs.push_back(make_stamp(rng));
  }
  items.columns = {{"id", std::move(id_col)},
                   {"val_a", std::move(val_a)},
                   {"val_b", std::move(val_b)},
                   {"val_c", std::move(val_c)},
                   {"name", std::move(name_col)},
                   {"tag", std::move(tag_col)},
                   {"stamp", std::move(stamp_col)}};
  ds.tables.push_back(std::move(items));

  const int m = cfg.rows_detail;
  Table events;
  events.name = "events";
  events.rows = static_cast<uint64_t>(m);
  Column eid{ColType::Numeric, {}, {}};
  Column fk{ColType::Numeric, {}, {}};
  Column amount{ColType::Numeric, {}, {}};
  Column label{ColType::Str, {}, {}};
  for (int i = 0; i < m; ++i) {
    eid.nums.push_back(i + 1);
    // Skewed foreign key: popular items get most events.
    fk.nums.push_back(1.0 + static_cast<double>(skewed_index(
                                 rng, static_cast<size_t>(n))));
    double u = unit_uniform(rng);
    amount.nums.push_back(std::floor(u * u * 1000.0));
    label.strs.push_back(kNouns[skewed_index(rng, 16)]);
  }
  events.columns = {{"id", std::move(eid)},
                    {"item_id", std::move(fk)},
                    {"amount", std::move(amount)},
                    {"label", std::move(label)}};
  ds.tables.push_back(std::move(events));
  return ds;
}

}  // namespace planest
