#include "pathbench/synthetic.hpp"

#include "pathbench/metrics.hpp"
#include "pathbench/rng.hpp"
#include "pathbench/text.hpp"

#include <array>
#include <cmath>
#include <cstdio>

namespace pathbench {

namespace {

constexpr std::array<std::string_view, 6> kSubStages{"", "A", "B", "C", "A1", "B2"};
constexpr std::array<std::string_view, 3> kRaces{"WHITE", "BLACK OR AFRICAN AMERICAN", "ASIAN"};

std::string barcode(std::size_t index) {
  char buf[16];
  const auto site = index / 10000;
  std::snprintf(buf, sizeof buf, "TCGA-%c%c-%04zu", static_cast<char>('A' + site / 26 % 26),
                static_cast<char>('A' + site % 26), index % 10000);
  return buf;
}

std::string report_text(const PathologyRecord& r, SeededStream& rng) {
  static constexpr std::array<std::string_view, 5> kFindings{
      "Margins are free of tumor.", "Lymphovascular invasion is identified.",
      "No perineural invasion is seen.", "Tumor size 3.2 cm in greatest dimension.",
      "Two of fourteen lymph nodes are positive for carcinoma."};
  std::string t = "SURGICAL PATHOLOGY REPORT\nSpecimen " + r.sample_id + ".\nFINAL DIAGNOSIS: " +
                  std::string(r.cancer_type.label()) + ", \"histologic\" grade " +
                  std::to_string(1 + rng.below(3)) + ".\n";
  for (std::size_t i = 0; i < 2 + rng.below(3); ++i) {
    t += std::string(kFindings[rng.below(kFindings.size())]) + "\n";
  }
  if (r.stage_raw) t += "Pathologic stage summary: " + *r.stage_raw + ".\n";
  return t;
}

}  // namespace

std::vector<PathologyRecord> synthetic_records(std::size_t n, std::uint64_t seed) {
  std::vector<PathologyRecord> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    SeededStream rng(seed, {"synthetic", std::to_string(i)});
    PathologyRecord r;
    r.sample_id = barcode(i);
    r.cancer_type = CancerType::at(i % CancerType::kCount);
    if (rng.uniform() < 0.85) {
      const auto stage = kAllStages[rng.below(4)];
      r.stage_raw = stage_label(stage) + std::string(kSubStages[rng.below(kSubStages.size())]);
      r.stage = stage;
    } else if (rng.uniform() < 0.5) {
      r.stage_raw = "Stage X";
    }
    if (rng.uniform() < 0.9) {
      // Exponential with a type-dependent scale, in whole days.
      const double scale_years = 1.0 + static_cast<double>(r.cancer_type.index() % 5);
      const double days = std::floor(-std::log(1.0 - rng.uniform()) * scale_years * 365.25);
      r.dss_time_years = days / 365.25;
      r.dss_event = rng.uniform() < 0.45;
    }
    r.age_at_diagnosis = static_cast<double>(30 + rng.below(55));
    r.race = std::string(kRaces[rng.below(kRaces.size())]);
    r.gender = rng.below(2) ? "FEMALE" : "MALE";
    r.report_text = report_text(r, rng);
    out.push_back(std::move(r));
  }
  return out;
}

std::pair<std::filesystem::path, std::filesystem::path> write_synthetic_tables(
    std::span<const PathologyRecord> records, const std::filesystem::path& dir) {
  std::string reports = "patient_filename,text\n";
  std::string clinical =
      "bcr_patient_barcode\ttype\tajcc_pathologic_tumor_stage\tDSS\tDSS.time\t"
      "age_at_initial_pathologic_diagnosis\trace\tgender\n";
  for (const auto& r : records) {
    reports += csv_field(r.sample_id + ".A1B2C3") + "," + csv_field(r.report_text) + "\n";
    const auto days = r.dss_time_years ? std::to_string(static_cast<long>(std::llround(*r.dss_time_years * 365.25)))
                                       : std::string("#N/A");
    clinical += r.sample_id + "\t" + std::string(r.cancer_type.tcga_code()) + "\t" +
                r.stage_raw.value_or("[Not Available]") + "\t" +
                (r.dss_event ? std::string(*r.dss_event ? "1" : "0") : std::string("#N/A")) + "\t" + days + "\t" +
                (r.age_at_diagnosis ? std::to_string(static_cast<int>(*r.age_at_diagnosis)) : "") + "\t" +
                r.race.value_or("") + "\t" + r.gender.value_or("") + "\n";
  }
  const auto rp = dir / "reports.csv";
  const auto cp = dir / "clinical.tsv";
  text::write_file_atomic(rp, reports);
  text::write_file_atomic(cp, clinical);
  return {rp, cp};
}

}  // namespace pathbench
