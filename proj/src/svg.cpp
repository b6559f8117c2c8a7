#include "sbindex/svg.hpp"

#include <cstdio>

namespace sbindex {

namespace {

std::string xml_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

SvgDoc::SvgDoc(int width, int height) : width_(width), height_(height) {}

std::string SvgDoc::px(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

void SvgDoc::rect(double x, double y, double w, double h, const std::string& style) {
    body_ += "<rect x=\"" + px(x) + "\" y=\"" + px(y) + "\" width=\"" + px(w) + "\" height=\"" +
             px(h) + "\" style=\"" + style + "\"/>\n";
}

void SvgDoc::line(double x1, double y1, double x2, double y2, const std::string& style) {
    body_ += "<line x1=\"" + px(x1) + "\" y1=\"" + px(y1) + "\" x2=\"" + px(x2) + "\" y2=\"" +
             px(y2) + "\" style=\"" + style + "\"/>\n";
}

void SvgDoc::polyline(const std::vector<std::pair<double, double>>& pts, const std::string& style) {
    body_ += "<polyline points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (i) body_ += ' ';
        body_ += px(pts[i].first) + "," + px(pts[i].second);
    }
    body_ += "\" style=\"" + style + "\"/>\n";
}

void SvgDoc::polygon(const std::vector<std::pair<double, double>>& pts, const std::string& style) {
    body_ += "<polygon points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (i) body_ += ' ';
        body_ += px(pts[i].first) + "," + px(pts[i].second);
    }
    body_ += "\" style=\"" + style + "\"/>\n";
}

void SvgDoc::circle(double cx, double cy, double r, const std::string& style) {
    body_ += "<circle cx=\"" + px(cx) + "\" cy=\"" + px(cy) + "\" r=\"" + px(r) + "\" style=\"" +
             style + "\"/>\n";
}

void SvgDoc::text(double x, double y, const std::string& content, const std::string& style) {
    body_ += "<text x=\"" + px(x) + "\" y=\"" + px(y) + "\" style=\"" + style + "\">" +
             xml_escape(content) + "</text>\n";
}

std::string SvgDoc::str() const {
    std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
                      std::to_string(width_) + "\" height=\"" + std::to_string(height_) +
                      "\" viewBox=\"0 0 " + std::to_string(width_) + " " +
                      std::to_string(height_) + "\">\n";
    out += "<rect x=\"0\" y=\"0\" width=\"" + std::to_string(width_) + "\" height=\"" +
           std::to_string(height_) + "\" style=\"fill:white\"/>\n";
    out += body_;
    out += "</svg>\n";
    return out;
}

}  // namespace sbindex
