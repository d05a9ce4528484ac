#include "barflex/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace barflex::svg {

namespace {

std::string px(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string vertex_label(int i) {
    if (i < 26) return std::string(1, static_cast<char>('A' + i));
    return "V" + std::to_string(i);
}

}  // namespace

std::string render_framework(const Framework& fw, const Vector* flex, const RenderOptions& opt) {
    if (fw.dim() != 2) {
        throw std::invalid_argument("rendering supports dim == 2 only, got dim = " +
                                    std::to_string(fw.dim()));
    }
    if (flex != nullptr && flex->size() != fw.dof()) {
        throw std::invalid_argument("flex vector length does not match the framework");
    }

    const int n = fw.n_vertices();
    double min_x = fw.config.coords[0], max_x = fw.config.coords[0];
    double min_y = fw.config.coords[1], max_y = fw.config.coords[1];
    for (int i = 0; i < n; ++i) {
        min_x = std::min(min_x, fw.config.coords[2 * i]);
        max_x = std::max(max_x, fw.config.coords[2 * i]);
        min_y = std::min(min_y, fw.config.coords[2 * i + 1]);
        max_y = std::max(max_y, fw.config.coords[2 * i + 1]);
    }
    double span = std::max(max_x - min_x, max_y - min_y);
    if (span < 1e-9) span = 1.0;
    const double margin = opt.margin_frac * span;
    const double model_w = (max_x - min_x) + 2.0 * margin;
    const double model_h = (max_y - min_y) + 2.0 * margin;
    const double scale = opt.width_px / model_w;
    const double height_px = model_h * scale;

    auto X = [&](double x) { return (x - min_x + margin) * scale; };
    auto Y = [&](double y) { return (max_y + margin - y) * scale; };

    std::string out;
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + px(opt.width_px) +
           "\" height=\"" + px(height_px) + "\" viewBox=\"0 0 " + px(opt.width_px) + " " +
           px(height_px) + "\">\n";

    for (int e = 0; e < fw.n_edges(); ++e) {
        const auto& [a, b] = fw.topology.edges[static_cast<std::size_t>(e)];
        out += "  <line class=\"edge\" x1=\"" + px(X(fw.config.coords[2 * a])) + "\" y1=\"" +
               px(Y(fw.config.coords[2 * a + 1])) + "\" x2=\"" + px(X(fw.config.coords[2 * b])) +
               "\" y2=\"" + px(Y(fw.config.coords[2 * b + 1])) +
               "\" stroke=\"black\" stroke-width=\"3\"";
        if (e == fw.topology.free_edge) out += " stroke-dasharray=\"9 6\"";
        out += "/>\n";
    }

    if (flex != nullptr) {
        double fastest = 0.0;
        for (int i = 0; i < n; ++i) {
            fastest = std::max(fastest, std::hypot((*flex)[2 * i], (*flex)[2 * i + 1]));
        }
        if (fastest > 0.0) {
            for (int i = 0; i < n; ++i) {
                double ux = (*flex)[2 * i], uy = (*flex)[2 * i + 1];
                double speed = std::hypot(ux, uy);
                if (speed < opt.arrow_threshold * fastest) continue;
                // Arrow in model space, largest one opt.arrow_scale long.
                double bx = fw.config.coords[2 * i], by = fw.config.coords[2 * i + 1];
                double tx = bx + opt.arrow_scale * ux / fastest;
                double ty = by + opt.arrow_scale * uy / fastest;
                double dx = tx - bx, dy = ty - by;
                double len = std::hypot(dx, dy);
                double hx = dx / len * 0.18 * opt.arrow_scale;
                double hy = dy / len * 0.18 * opt.arrow_scale;
                // Head barbs: tip minus the direction rotated by +-30 degrees.
                const double c = 0.8660254037844386, s = 0.5;
                double b1x = tx - (c * hx - s * hy), b1y = ty - (s * hx + c * hy);
                double b2x = tx - (c * hx + s * hy), b2y = ty - (-s * hx + c * hy);
                out += "  <path class=\"flex-arrow\" d=\"M " + px(X(bx)) + " " + px(Y(by)) +
                       " L " + px(X(tx)) + " " + px(Y(ty)) + " M " + px(X(b1x)) + " " +
                       px(Y(b1y)) + " L " + px(X(tx)) + " " + px(Y(ty)) + " L " + px(X(b2x)) +
                       " " + px(Y(b2y)) +
                       "\" fill=\"none\" stroke=\"red\" stroke-width=\"2.5\"/>\n";
            }
        }
    }

    for (int i = 0; i < n; ++i) {
        double cx = X(fw.config.coords[2 * i]);
        double cy = Y(fw.config.coords[2 * i + 1]);
        out += "  <circle class=\"vertex\" cx=\"" + px(cx) + "\" cy=\"" + px(cy) +
               "\" r=\"4.5\" fill=\"black\"/>\n";
        out += "  <text x=\"" + px(cx + 8.0) + "\" y=\"" + px(cy - 8.0) +
               "\" font-family=\"sans-serif\" font-size=\"16\">" + vertex_label(i) +
               "</text>\n";
    }

    out += "</svg>\n";
    return out;
}

}  // namespace barflex::svg
