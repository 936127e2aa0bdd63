#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace pathbench {

enum class Task { TypeId, Staging, Prognosis, Summarize };

std::string_view task_name(Task task);
std::optional<Task> parse_task(std::string_view name);

/// The 32 answer options of the cancer-type prompt, in prompt order.
inline constexpr std::array<std::string_view, 32> kCancerTypeLabels{
    "Adrenocortical carcinoma",
    "Bladder Urothelial Carcinoma",
    "Brain Lower Grade Glioma",
    "Breast invasive carcinoma",
    "Cervical squamous cell carcinoma and endocervical adenocarcinoma",
    "Cholangiocarcinoma",
    "Colon adenocarcinoma",
    "Esophageal carcinoma",
    "Glioblastoma multiforme",
    "Head and Neck squamous cell carcinoma",
    "Kidney Chromophobe",
    "Kidney renal clear cell carcinoma",
    "Kidney renal papillary cell carcinoma",
    "Liver hepatocellular carcinoma",
    "Lung adenocarcinoma",
    "Lung squamous cell carcinoma",
    "Lymphoid Neoplasm Diffuse Large B-cell Lymphoma",
    "Mesothelioma",
    "Ovarian serous cystadenocarcinoma",
    "Pancreatic adenocarcinoma",
    "Pheochromocytoma and Paraganglioma",
    "Prostate adenocarcinoma",
    "Rectum adenocarcinoma",
    "Sarcoma",
    "Skin Cutaneous Melanoma",
    "Stomach adenocarcinoma",
    "Testicular Germ Cell Tumors",
    "Thymoma",
    "Thyroid carcinoma",
    "Uterine Carcinosarcoma",
    "Uterine Corpus Endometrial Carcinoma",
    "Uveal Melanoma",
};

/// TCGA study abbreviations, index-aligned with kCancerTypeLabels.
inline constexpr std::array<std::string_view, 32> kTcgaStudyCodes{
    "ACC",  "BLCA", "LGG",  "BRCA", "CESC", "CHOL", "COAD", "ESCA",
    "GBM",  "HNSC", "KICH", "KIRC", "KIRP", "LIHC", "LUAD", "LUSC",
    "DLBC", "MESO", "OV",   "PAAD", "PCPG", "PRAD", "READ", "SARC",
    "SKCM", "STAD", "TGCT", "THYM", "THCA", "UCS",  "UCEC", "UVM",
};

class CancerType {
 public:
  static constexpr std::size_t kCount = kCancerTypeLabels.size();

  static CancerType at(std::size_t index);
  /// Case-insensitive, whitespace-trimmed match against the canonical labels.
  static std::optional<CancerType> parse(std::string_view text);
  static std::optional<CancerType> from_tcga_code(std::string_view code);
  static std::vector<CancerType> all();

  std::size_t index() const noexcept { return index_; }
  std::string_view label() const noexcept { return kCancerTypeLabels[index_]; }
  std::string_view tcga_code() const noexcept { return kTcgaStudyCodes[index_]; }

  auto operator<=>(const CancerType&) const = default;

 private:
  explicit CancerType(std::uint8_t index) : index_(index) {}
  std::uint8_t index_;
};

enum class AjccStage : std::uint8_t { I = 1, II = 2, III = 3, IV = 4 };

inline constexpr std::array<AjccStage, 4> kAllStages{AjccStage::I, AjccStage::II,
                                                     AjccStage::III, AjccStage::IV};

std::string_view roman(AjccStage stage);
/// "Stage II" etc.
std::string stage_label(AjccStage stage);

/// Canonical answer for one task instance.
using Answer = std::variant<CancerType, AjccStage, bool>;

bool answer_matches_task(const Answer& answer, Task task);
/// Display label used by metrics ("Lung adenocarcinoma", "Stage II", "True").
std::string answer_label(const Answer& answer);
/// Inverse of answer_label for the given task.
std::optional<Answer> parse_answer_label(Task task, std::string_view label);
std::string_view answer_key(Task task);
/// Exact assistant answer string, e.g. {"stage": "Stage III"}.
std::string canonical_answer_json(Task task, const Answer& answer);
/// Closed answer set of a scored task, in canonical order.
std::vector<std::string> task_labelset(Task task);
std::vector<Answer> task_answers(Task task);

}  // namespace pathbench
