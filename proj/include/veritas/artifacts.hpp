#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "veritas/dataset.hpp"
#include "veritas/preference.hpp"
#include "veritas/profile.hpp"

namespace veritas {

// RFC 4180-style CSV: fields holding a comma, quote or newline are quoted.
using CsvRow = std::vector<std::string>;

std::string csv_line(const CsvRow& fields);
// Rows of `text`, header included. Throws InputError on an unterminated quote.
std::vector<CsvRow> parse_csv(std::string_view text);

// Shortest round-trip decimal form.
std::string format_number(double v);
// Whole-string decimal parse; throws InputError naming `what` otherwise.
double parse_number(std::string_view s, std::string_view what);

// Everything `recommend` needs, as written by `profile`.
struct ProfileArtifacts {
    ReliabilityProfile reliability;
    PreferenceProfile preferences;
    std::map<std::string, std::string> truths; // task -> estimate as text
    std::map<std::string, std::string> task_category;
    std::map<std::string, std::set<std::string>> completed;
};

std::string reliability_to_csv(const ReliabilityProfile& profile);
ReliabilityProfile reliability_from_csv(std::string_view text);

std::string preferences_to_csv(const PreferenceProfile& profile);
PreferenceProfile preferences_from_csv(std::string_view text);

std::string truths_to_csv(const TruthMap& truths);
std::map<std::string, std::string> truths_from_csv(std::string_view text);

std::string tasks_to_csv(const Dataset& dataset);
std::string completed_to_csv(const Dataset& dataset);
std::map<std::string, std::set<std::string>> completed_from_csv(std::string_view text);

// File names inside a profile directory.
namespace files {
inline constexpr const char* reliability = "reliability.csv";
inline constexpr const char* truths = "truths.csv";
inline constexpr const char* preferences = "preferences.csv";
inline constexpr const char* tasks = "tasks.csv";
inline constexpr const char* completed = "completed.csv";
inline constexpr const char* manifest = "manifest.json";
} // namespace files

ProfileArtifacts read_profile_dir(const std::filesystem::path& dir);

std::string read_text_file(const std::filesystem::path& path);

// Writes `text` to `path` via a temporary file and rename.
void write_text_file(const std::filesystem::path& path, std::string_view text);

} // namespace veritas
