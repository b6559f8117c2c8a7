#pragma once

#include <string>
#include <utility>
#include <vector>

namespace sbindex {

/// Minimal deterministic SVG writer. Coordinates are emitted with a fixed
/// two-decimal format so repeated runs produce byte-identical documents.
class SvgDoc {
public:
    SvgDoc(int width, int height);

    void rect(double x, double y, double w, double h, const std::string& style);
    void line(double x1, double y1, double x2, double y2, const std::string& style);
    void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& style);
    void polygon(const std::vector<std::pair<double, double>>& pts, const std::string& style);
    void circle(double cx, double cy, double r, const std::string& style);
    void text(double x, double y, const std::string& content, const std::string& style);

    std::string str() const;

    static std::string px(double v);  // fixed "%.2f"

private:
    int width_;
    int height_;
    std::string body_;
};

}  // namespace sbindex
