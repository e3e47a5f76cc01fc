#pragma once
// Report rendering: markdown tables in the shape of the published result
// tables (model fairness/accuracy, per-occupation fairness, group accuracy
// deltas, review scores) plus static bar-chart figures drawn straight into
// PNGs with a small 5x7 bitmap font. Metrics print with 3 decimals,
// accuracies as percentages with 1 decimal.

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "perturbkit/evaluation.hpp"
#include "perturbkit/image.hpp"
#include "perturbkit/review.hpp"
#include "perturbkit/types.hpp"
#include "perturbkit/util.hpp"

namespace perturbkit {

inline std::string markdown_table(const std::vector<std::string>& headers,
                                  const std::vector<std::vector<std::string>>& rows) {
    std::string out = "|";
    for (const auto& h : headers) out += " " + h + " |";
    out += "\n|";
    for (std::size_t i = 0; i < headers.size(); ++i) out += " --- |";
    out += "\n";
    for (const auto& row : rows) {
        out += "|";
        for (const auto& cell : row) out += " " + cell + " |";
        out += "\n";
    }
    return out;
}

// Table-4/5 shape: one row per model.
inline std::string render_fairness_table(const std::vector<FairnessReport>& reports) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& r : reports)
        rows.push_back({r.model_name, to_fixed(r.fairness, 3), percent(r.accuracy, 1)});
    return markdown_table({"Model", "Fairness Metric", "Classification Accuracy"}, rows);
}

// Table-7 shape: fairness metric per occupation, one row per model.
inline std::string render_per_occupation_table(const std::vector<FairnessReport>& reports) {
    std::vector<std::string> occupations;
    for (const auto& r : reports)
        for (const auto& [occ, score] : r.per_occupation)
            if (std::find(occupations.begin(), occupations.end(), occ) == occupations.end())
                occupations.push_back(occ);
    std::sort(occupations.begin(), occupations.end());

    std::vector<std::string> headers{"Model"};
    headers.insert(headers.end(), occupations.begin(), occupations.end());
    std::vector<std::vector<std::string>> rows;
    for (const auto& r : reports) {
        std::vector<std::string> row{r.model_name};
        for (const auto& occ : occupations) {
            const auto it = r.per_occupation.find(occ);
            row.push_back(it == r.per_occupation.end() ? "-" : to_fixed(it->second.fairness, 3));
        }
        rows.push_back(std::move(row));
    }
    return markdown_table(headers, rows);
}

inline std::string render_group_accuracy_table(const FairnessReport& report) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& [group, acc] : report.group_accuracy) {
        std::string delta = "-";
        if (const auto it = report.group_delta.find(group); it != report.group_delta.end())
            delta = signed_percent(it->second, 2);
        rows.push_back({std::string(canonical_name(group)), percent(acc, 1), delta});
    }
    return markdown_table({"Group", "Accuracy", "Delta vs Caucasian"}, rows);
}

inline std::string render_review_table(const ReviewAggregate& agg) {
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"Overall", percent(agg.overall.realism, 1), percent(agg.overall.fidelity, 1)});
    for (const auto& [occ, scores] : agg.per_occupation)
        rows.push_back({occ, percent(scores.realism, 1), percent(scores.fidelity, 1)});
    return markdown_table({"Data", "Realism Score", "Race Fidelity Score"}, rows);
}

// --- figures -------------------------------------------------------------------

namespace chart_detail {

// 5x7 font, column-major bytes, LSB at the top row. Covers the glyphs the
// charts use; anything else renders as blank.
inline const std::uint8_t* glyph5x7(char c) {
    static const std::map<char, std::array<std::uint8_t, 5>> table = {
        {' ', {0x00, 0x00, 0x00, 0x00, 0x00}}, {'%', {0x23, 0x13, 0x08, 0x64, 0x62}},
        {'(', {0x00, 0x1C, 0x22, 0x41, 0x00}}, {')', {0x00, 0x41, 0x22, 0x1C, 0x00}},
        {'+', {0x08, 0x08, 0x3E, 0x08, 0x08}}, {'-', {0x08, 0x08, 0x08, 0x08, 0x08}},
        {'.', {0x00, 0x60, 0x60, 0x00, 0x00}}, {'/', {0x20, 0x10, 0x08, 0x04, 0x02}},
        {'0', {0x3E, 0x51, 0x49, 0x45, 0x3E}}, {'1', {0x00, 0x42, 0x7F, 0x40, 0x00}},
        {'2', {0x42, 0x61, 0x51, 0x49, 0x46}}, {'3', {0x21, 0x41, 0x45, 0x4B, 0x31}},
        {'4', {0x18, 0x14, 0x12, 0x7F, 0x10}}, {'5', {0x27, 0x45, 0x45, 0x45, 0x39}},
        {'6', {0x3C, 0x4A, 0x49, 0x49, 0x30}}, {'7', {0x01, 0x71, 0x09, 0x05, 0x03}},
        {'8', {0x36, 0x49, 0x49, 0x49, 0x36}}, {'9', {0x06, 0x49, 0x49, 0x29, 0x1E}},
        {':', {0x00, 0x36, 0x36, 0x00, 0x00}}, {'=', {0x14, 0x14, 0x14, 0x14, 0x14}},
        {'A', {0x7E, 0x11, 0x11, 0x11, 0x7E}}, {'B', {0x7F, 0x49, 0x49, 0x49, 0x36}},
        {'C', {0x3E, 0x41, 0x41, 0x41, 0x22}}, {'D', {0x7F, 0x41, 0x41, 0x22, 0x1C}},
        {'E', {0x7F, 0x49, 0x49, 0x49, 0x41}}, {'F', {0x7F, 0x09, 0x09, 0x09, 0x01}},
        {'G', {0x3E, 0x41, 0x49, 0x49, 0x7A}}, {'H', {0x7F, 0x08, 0x08, 0x08, 0x7F}},
        {'I', {0x00, 0x41, 0x7F, 0x41, 0x00}}, {'J', {0x20, 0x40, 0x41, 0x3F, 0x01}},
        {'K', {0x7F, 0x08, 0x14, 0x22, 0x41}}, {'L', {0x7F, 0x40, 0x40, 0x40, 0x40}},
        {'M', {0x7F, 0x02, 0x0C, 0x02, 0x7F}}, {'N', {0x7F, 0x04, 0x08, 0x10, 0x7F}},
        {'O', {0x3E, 0x41, 0x41, 0x41, 0x3E}}, {'P', {0x7F, 0x09, 0x09, 0x09, 0x06}},
        {'Q', {0x3E, 0x41, 0x51, 0x21, 0x5E}}, {'R', {0x7F, 0x09, 0x19, 0x29, 0x46}},
        {'S', {0x46, 0x49, 0x49, 0x49, 0x31}}, {'T', {0x01, 0x01, 0x7F, 0x01, 0x01}},
        {'U', {0x3F, 0x40, 0x40, 0x40, 0x3F}}, {'V', {0x1F, 0x20, 0x40, 0x20, 0x1F}},
        {'W', {0x3F, 0x40, 0x38, 0x40, 0x3F}}, {'X', {0x63, 0x14, 0x08, 0x14, 0x63}},
        {'Y', {0x07, 0x08, 0x70, 0x08, 0x07}}, {'Z', {0x61, 0x51, 0x49, 0x45, 0x43}},
        {'_', {0x40, 0x40, 0x40, 0x40, 0x40}},
    };
    const auto it = table.find(c);
    return it == table.end() ? nullptr : it->second.data();
}

struct Rgb {
    std::uint8_t r, g, b;
};

inline void fill_rect(Image& img, int x0, int y0, int x1, int y1, Rgb color) {
    x0 = std::clamp(x0, 0, img.width);
    x1 = std::clamp(x1, 0, img.width);
    y0 = std::clamp(y0, 0, img.height);
    y1 = std::clamp(y1, 0, img.height);
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
            img.at(x, y, 0) = color.r;
            img.at(x, y, 1) = color.g;
            img.at(x, y, 2) = color.b;
        }
}

// Uppercased 5x7 text at integer scale.
inline void draw_text(Image& img, int x, int y, const std::string& text, Rgb color,
                      int scale = 1) {
    int cx = x;
    for (char raw : text) {
        const char c = static_cast<char>(std::toupper(static_cast<unsigned char>(raw)));
        if (const std::uint8_t* glyph = glyph5x7(c)) {
            for (int col = 0; col < 5; ++col)
                for (int row = 0; row < 7; ++row)
                    if (glyph[col] & (1 << row))
                        fill_rect(img, cx + col * scale, y + row * scale, cx + (col + 1) * scale,
                                  y + (row + 1) * scale, color);
        }
        cx += 6 * scale;
    }
}

inline Rgb bar_color(std::size_t index) {
    static const Rgb palette[] = {{66, 133, 244}, {219, 68, 55}, {244, 180, 0},
                                  {15, 157, 88},  {171, 71, 188}, {0, 172, 193}};
    return palette[index % (sizeof(palette) / sizeof(palette[0]))];
}

}  // namespace chart_detail

// Vertical bar chart; values are drawn against [y_min, y_max] with the
// formatted value above each bar and its label below.
inline void render_bar_chart(const std::filesystem::path& path, const std::string& title,
                             const std::vector<std::string>& labels,
                             const std::vector<double>& values, double y_min, double y_max,
                             const std::function<std::string(double)>& format) {
    if (labels.size() != values.size() || labels.empty())
        throw std::invalid_argument("render_bar_chart: labels and values must align");
    if (!(y_max > y_min)) throw std::invalid_argument("render_bar_chart: empty y range");

    const int width = std::max(360, 90 * static_cast<int>(labels.size()) + 80);
    const int height = 300;
    const int left = 50, right = 20, top = 40, bottom = 40;
    Image img = Image::filled(width, height, 3, 255);

    chart_detail::draw_text(img, left, 12, title, {30, 30, 30});
    const int plot_w = width - left - right;
    const int plot_h = height - top - bottom;
    // Axes.
    chart_detail::fill_rect(img, left - 1, top, left, height - bottom, {90, 90, 90});
    chart_detail::fill_rect(img, left - 1, height - bottom, width - right, height - bottom + 1,
                            {90, 90, 90});
    // Four horizontal gridlines with tick labels.
    for (int tick = 0; tick <= 4; ++tick) {
        const double v = y_min + (y_max - y_min) * tick / 4.0;
        const int y = height - bottom - static_cast<int>(plot_h * (v - y_min) / (y_max - y_min));
        if (tick > 0) chart_detail::fill_rect(img, left, y, width - right, y + 1, {225, 225, 225});
        chart_detail::draw_text(img, 4, y - 3, to_fixed(v, 2), {120, 120, 120});
    }

    const int slot = plot_w / static_cast<int>(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double clamped = std::clamp(values[i], y_min, y_max);
        const int bar_h = static_cast<int>(plot_h * (clamped - y_min) / (y_max - y_min));
        const int x0 = left + static_cast<int>(i) * slot + slot / 6;
        const int x1 = left + static_cast<int>(i) * slot + slot - slot / 6;
        const int y0 = height - bottom - bar_h;
        chart_detail::fill_rect(img, x0, y0, x1, height - bottom, chart_detail::bar_color(i));
        chart_detail::draw_text(img, x0, y0 - 10, format(values[i]), {60, 60, 60});
        std::string label = labels[i].substr(0, static_cast<std::size_t>(slot / 6));
        chart_detail::draw_text(img, left + static_cast<int>(i) * slot + 2, height - bottom + 6,
                                label, {60, 60, 60});
    }
    write_png(img, path);
}

// Writes report.md, report.json, and figures/*.png for a set of model
// evaluations. Returns the markdown for convenience.
inline std::string write_report(const std::vector<FairnessReport>& reports,
                                const std::filesystem::path& out_dir) {
    if (reports.empty()) throw std::invalid_argument("write_report: no model reports");
    std::string md = "# Fairness evaluation report\n\n";
    md += "## Fairness metric and classification accuracy\n\n";
    md += render_fairness_table(reports);
    bool any_occupation = false;
    for (const auto& r : reports) any_occupation |= !r.per_occupation.empty();
    if (any_occupation) {
        md += "\n## Fairness metric by occupation\n\n";
        md += render_per_occupation_table(reports);
    }
    for (const auto& r : reports) {
        if (r.group_accuracy.empty()) continue;
        md += "\n## Accuracy by group: " + r.model_name + "\n\n";
        md += render_group_accuracy_table(r);
    }
    md += "\n![fairness metric](figures/fairness_metric.png)\n";
    md += "\n![accuracy](figures/accuracy.png)\n";
    write_text_file(out_dir / "report.md", md);

    Json j;
    Json models = Json::array();
    for (const auto& r : reports) models.push_back(to_json(r));
    j["models"] = std::move(models);
    write_text_file(out_dir / "report.json", j.dump(2) + "\n");

    std::vector<std::string> names;
    std::vector<double> metrics, accuracies;
    for (const auto& r : reports) {
        names.push_back(r.model_name);
        metrics.push_back(r.fairness);
        accuracies.push_back(r.accuracy);
    }
    render_bar_chart(out_dir / "figures" / "fairness_metric.png", "Fairness metric", names,
                     metrics, 0.0, 1.0, [](double v) { return to_fixed(v, 3); });
    render_bar_chart(out_dir / "figures" / "accuracy.png", "Classification accuracy", names,
                     accuracies, 0.0, 1.0, [](double v) { return percent(v, 1); });
    return md;
}

}  // namespace perturbkit
