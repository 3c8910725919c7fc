#include "veritas/artifacts.hpp"

#include "veritas/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace veritas {

namespace {

void expect_header(const std::vector<CsvRow>& rows, const CsvRow& header, std::string_view what) {
    if (rows.empty() || rows.front() != header) {
        std::string want;
        for (const auto& h : header) want += (want.empty() ? "" : ",") + h;
        throw InputError(std::string(what) + ": expected header \"" + want + "\"");
    }
}

void expect_width(const CsvRow& row, std::size_t n, std::string_view what, std::size_t line) {
    if (row.size() != n) {
        throw InputError(std::string(what) + " line " + std::to_string(line) + ": expected " + std::to_string(n) +
                         " fields, got " + std::to_string(row.size()));
    }
}

std::vector<std::string> sorted_unique(std::vector<std::string> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

Eigen::Index index_in(const std::vector<std::string>& sorted, const std::string& id) {
    return static_cast<Eigen::Index>(std::lower_bound(sorted.begin(), sorted.end(), id) - sorted.begin());
}

} // namespace

std::string csv_line(const CsvRow& fields) {
    std::string out;
    for (std::size_t k = 0; k < fields.size(); ++k) {
        if (k) out += ',';
        const std::string& f = fields[k];
        if (f.find_first_of(",\"\n\r") == std::string::npos) {
            out += f;
            continue;
        }
        out += '"';
        for (char c : f) {
            if (c == '"') out += '"';
            out += c;
        }
        out += '"';
    }
    out += '\n';
    return out;
}

std::vector<CsvRow> parse_csv(std::string_view text) {
    std::vector<CsvRow> rows;
    CsvRow row;
    std::string field;
    bool quoted = false, any = false;
    for (std::size_t k = 0; k < text.size(); ++k) {
        const char c = text[k];
        if (quoted) {
            if (c == '"' && k + 1 < text.size() && text[k + 1] == '"') {
                field += '"';
                ++k;
            } else if (c == '"') {
                quoted = false;
            } else {
                field += c;
            }
            continue;
        }
        if (c == '"') {
            quoted = true;
            any = true;
        } else if (c == ',') {
            row.push_back(std::move(field));
            field.clear();
            any = true;
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && k + 1 < text.size() && text[k + 1] == '\n') ++k;
            if (any || !field.empty()) {
                row.push_back(std::move(field));
                rows.push_back(std::move(row));
            }
            row.clear();
            field.clear();
            any = false;
        } else {
            field += c;
            any = true;
        }
    }
    if (quoted) throw InputError("csv: unterminated quoted field");
    if (any || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string format_number(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_number(std::string_view s, std::string_view what) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v)) {
        throw InputError(std::string(what) + ": \"" + std::string(s) + "\" is not a finite number");
    }
    return v;
}

std::string reliability_to_csv(const ReliabilityProfile& q) {
    std::string out = csv_line({"user", "category", "value", "provenance"});
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
        for (Eigen::Index c = 0; c < q.cols(); ++c) {
            const Provenance p = q.provenance(i, c);
            out += csv_line({q.users()[static_cast<std::size_t>(i)], q.categories()[static_cast<std::size_t>(c)],
                             p == Provenance::Missing ? std::string() : format_number(q.value(i, c)),
                             std::string(to_string(p))});
        }
    }
    return out;
}

ReliabilityProfile reliability_from_csv(std::string_view text) {
    const auto rows = parse_csv(text);
    expect_header(rows, {"user", "category", "value", "provenance"}, "reliability.csv");
    std::vector<std::string> users, categories;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        expect_width(rows[r], 4, "reliability.csv", r + 1);
        users.push_back(rows[r][0]);
        categories.push_back(rows[r][1]);
    }
    ReliabilityProfile q(sorted_unique(std::move(users)), sorted_unique(std::move(categories)));
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const Provenance p = parse_provenance(rows[r][3]);
        if (p == Provenance::Missing) continue;
        const auto i = *q.user_index(rows[r][0]);
        const auto c = *q.category_index(rows[r][1]);
        if (q.provenance(i, c) != Provenance::Missing) {
            throw InputError("reliability.csv line " + std::to_string(r + 1) + ": duplicate entry");
        }
        q.set(i, c, parse_number(rows[r][2], "reliability.csv value"), p);
    }
    return q;
}

std::string preferences_to_csv(const PreferenceProfile& pref) {
    std::string out = csv_line({"user", "task", "p"});
    for (std::size_t i = 0; i < pref.users.size(); ++i) {
        for (std::size_t j = 0; j < pref.tasks.size(); ++j) {
            out += csv_line({pref.users[i], pref.tasks[j],
                             format_number(pref.p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)))});
        }
    }
    return out;
}

PreferenceProfile preferences_from_csv(std::string_view text) {
    const auto rows = parse_csv(text);
    expect_header(rows, {"user", "task", "p"}, "preferences.csv");
    PreferenceProfile pref;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        expect_width(rows[r], 3, "preferences.csv", r + 1);
        pref.users.push_back(rows[r][0]);
        pref.tasks.push_back(rows[r][1]);
    }
    pref.users = sorted_unique(std::move(pref.users));
    pref.tasks = sorted_unique(std::move(pref.tasks));
    const auto n = static_cast<Eigen::Index>(pref.users.size());
    const auto t = static_cast<Eigen::Index>(pref.tasks.size());
    pref.p = Eigen::MatrixXd::Constant(n, t, std::nan(""));
    for (std::size_t r = 1; r < rows.size(); ++r) {
        pref.p(index_in(pref.users, rows[r][0]), index_in(pref.tasks, rows[r][1])) =
            parse_number(rows[r][2], "preferences.csv p");
    }
    if (pref.p.hasNaN()) throw InputError("preferences.csv: not every (user, task) pair has a preference");
    return pref;
}

std::string truths_to_csv(const TruthMap& truths) {
    std::string out = csv_line({"task", "estimate"});
    for (const auto& [task, v] : truths) out += csv_line({task, to_string(v)});
    return out;
}

std::map<std::string, std::string> truths_from_csv(std::string_view text) {
    const auto rows = parse_csv(text);
    expect_header(rows, {"task", "estimate"}, "truths.csv");
    std::map<std::string, std::string> out;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        expect_width(rows[r], 2, "truths.csv", r + 1);
        if (!out.emplace(rows[r][0], rows[r][1]).second) {
            throw InputError("truths.csv line " + std::to_string(r + 1) + ": duplicate task \"" + rows[r][0] + "\"");
        }
    }
    return out;
}

std::string tasks_to_csv(const Dataset& ds) {
    std::string out = csv_line({"task", "category"});
    for (const Task& t : ds.tasks()) out += csv_line({t.id, t.category});
    return out;
}

std::string completed_to_csv(const Dataset& ds) {
    std::string out = csv_line({"user", "task"});
    for (const auto& [key, flags] : ds.event_table()) {
        if (flags.completed) out += csv_line({ds.users()[key.first], ds.tasks()[key.second].id});
    }
    return out;
}

std::map<std::string, std::set<std::string>> completed_from_csv(std::string_view text) {
    const auto rows = parse_csv(text);
    expect_header(rows, {"user", "task"}, "completed.csv");
    std::map<std::string, std::set<std::string>> out;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        expect_width(rows[r], 2, "completed.csv", r + 1);
        out[rows[r][0]].insert(rows[r][1]);
    }
    return out;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read file \"" + path.string() + "\"");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw InputError("cannot write file \"" + path.string() + "\"");
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        if (!out) throw InputError("cannot write file \"" + path.string() + "\"");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw InputError("cannot write file \"" + path.string() + "\": " + ec.message());
}

ProfileArtifacts read_profile_dir(const std::filesystem::path& dir) {
    ProfileArtifacts a;
    a.reliability = reliability_from_csv(read_text_file(dir / files::reliability));
    a.preferences = preferences_from_csv(read_text_file(dir / files::preferences));
    a.truths = truths_from_csv(read_text_file(dir / files::truths));
    const auto rows = parse_csv(read_text_file(dir / files::tasks));
    expect_header(rows, {"task", "category"}, "tasks.csv");
    for (std::size_t r = 1; r < rows.size(); ++r) {
        expect_width(rows[r], 2, "tasks.csv", r + 1);
        a.task_category.emplace(rows[r][0], rows[r][1]);
    }
    a.completed = completed_from_csv(read_text_file(dir / files::completed));
    return a;
}

} // namespace veritas
