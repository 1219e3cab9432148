#include "mov/flow.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "mov/image.hpp"

namespace mov {

namespace {

double clamp_at(const Tensor& img, int y, int x) {
    y = std::max(0, std::min(img.extent(0) - 1, y));
    x = std::max(0, std::min(img.extent(1) - 1, x));
    return img.at(y, x);
}

double bilinear(const Tensor& img, double y, double x) {
    int y0 = static_cast<int>(std::floor(y));
    int x0 = static_cast<int>(std::floor(x));
    double fy = y - y0, fx = x - x0;
    double a = clamp_at(img, y0, x0), b = clamp_at(img, y0, x0 + 1);
    double c = clamp_at(img, y0 + 1, x0), d = clamp_at(img, y0 + 1, x0 + 1);
    return (1 - fy) * ((1 - fx) * a + fx * b) + fy * ((1 - fx) * c + fx * d);
}

Tensor gaussian_smooth(const Tensor& img, double sigma) {
    if (sigma <= 0.0) return img;
    int radius = std::max(1, static_cast<int>(std::ceil(2.5 * sigma)));
    std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        double v = std::exp(-0.5 * i * i / (sigma * sigma));
        kernel[static_cast<std::size_t>(i + radius)] = v;
        sum += v;
    }
    for (double& v : kernel) v /= sum;
    int h = img.extent(0), w = img.extent(1);
    Tensor tmp({h, w}), out({h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) {
                acc += kernel[static_cast<std::size_t>(i + radius)] * clamp_at(img, y, x + i);
            }
            tmp.at(y, x) = acc;
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) {
                acc += kernel[static_cast<std::size_t>(i + radius)] * clamp_at(tmp, y + i, x);
            }
            out.at(y, x) = acc;
        }
    return out;
}

Tensor downsample_half(const Tensor& img) {
    Tensor smooth = gaussian_smooth(img, 0.8);
    int h = std::max(1, img.extent(0) / 2), w = std::max(1, img.extent(1) / 2);
    Tensor out({h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out.at(y, x) = bilinear(smooth, 2.0 * y, 2.0 * x);
    return out;
}

Tensor resize_bilinear(const Tensor& img, int nh, int nw) {
    Tensor out({nh, nw});
    double sy = static_cast<double>(img.extent(0)) / nh;
    double sx = static_cast<double>(img.extent(1)) / nw;
    for (int y = 0; y < nh; ++y)
        for (int x = 0; x < nw; ++x) out.at(y, x) = bilinear(img, y * sy, x * sx);
    return out;
}

// Primal-dual TV-L1 at one pyramid level; u1/u2 hold the current flow and are
// refined in place.
void tvl1_level(const Tensor& i0, const Tensor& i1, Tensor& u1, Tensor& u2,
                const FlowParams& prm) {
    int h = i0.extent(0), w = i0.extent(1);
    double lt = prm.smoothness * prm.theta;
    double taut = prm.tau / prm.theta;
    // centered spatial gradient of the second image
    Tensor i1x({h, w}), i1y({h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            i1x.at(y, x) = 0.5 * (clamp_at(i1, y, x + 1) - clamp_at(i1, y, x - 1));
            i1y.at(y, x) = 0.5 * (clamp_at(i1, y + 1, x) - clamp_at(i1, y - 1, x));
        }
    for (int warp = 0; warp < prm.warps; ++warp) {
        Tensor i1w({h, w}), i1wx({h, w}), i1wy({h, w}), grad({h, w}), rho_c({h, w});
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double wx = x + u1.at(y, x), wy = y + u2.at(y, x);
                i1w.at(y, x) = bilinear(i1, wy, wx);
                i1wx.at(y, x) = bilinear(i1x, wy, wx);
                i1wy.at(y, x) = bilinear(i1y, wy, wx);
                grad.at(y, x) = i1wx.at(y, x) * i1wx.at(y, x) + i1wy.at(y, x) * i1wy.at(y, x);
                rho_c.at(y, x) = i1w.at(y, x) - i1wx.at(y, x) * u1.at(y, x) -
                                 i1wy.at(y, x) * u2.at(y, x) - i0.at(y, x);
            }
        Tensor p11({h, w}), p12({h, w}), p21({h, w}), p22({h, w});
        Tensor v1({h, w}), v2({h, w});
        for (int it = 0; it < prm.iterations; ++it) {
            // data-term thresholding step
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    double rho = rho_c.at(y, x) + i1wx.at(y, x) * u1.at(y, x) +
                                 i1wy.at(y, x) * u2.at(y, x);
                    double d1 = 0.0, d2 = 0.0;
                    double g = grad.at(y, x);
                    if (rho < -lt * g) {
                        d1 = lt * i1wx.at(y, x);
                        d2 = lt * i1wy.at(y, x);
                    } else if (rho > lt * g) {
                        d1 = -lt * i1wx.at(y, x);
                        d2 = -lt * i1wy.at(y, x);
                    } else if (g > 1e-10) {
                        d1 = -rho * i1wx.at(y, x) / g;
                        d2 = -rho * i1wy.at(y, x) / g;
                    }
                    v1.at(y, x) = u1.at(y, x) + d1;
                    v2.at(y, x) = u2.at(y, x) + d2;
                }
            // primal update from the divergence of the dual field
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    double div1 = (x == 0 ? p11.at(y, 0)
                                          : (x == w - 1 ? -p11.at(y, w - 2)
                                                        : p11.at(y, x) - p11.at(y, x - 1))) +
                                  (y == 0 ? p12.at(0, x)
                                          : (y == h - 1 ? -p12.at(h - 2, x)
                                                        : p12.at(y, x) - p12.at(y - 1, x)));
                    double div2 = (x == 0 ? p21.at(y, 0)
                                          : (x == w - 1 ? -p21.at(y, w - 2)
                                                        : p21.at(y, x) - p21.at(y, x - 1))) +
                                  (y == 0 ? p22.at(0, x)
                                          : (y == h - 1 ? -p22.at(h - 2, x)
                                                        : p22.at(y, x) - p22.at(y - 1, x)));
                    u1.at(y, x) = v1.at(y, x) + prm.theta * div1;
                    u2.at(y, x) = v2.at(y, x) + prm.theta * div2;
                }
            // dual ascent with reprojection
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    double u1x = (x == w - 1) ? 0.0 : u1.at(y, x + 1) - u1.at(y, x);
                    double u1y = (y == h - 1) ? 0.0 : u1.at(y + 1, x) - u1.at(y, x);
                    double u2x = (x == w - 1) ? 0.0 : u2.at(y, x + 1) - u2.at(y, x);
                    double u2y = (y == h - 1) ? 0.0 : u2.at(y + 1, x) - u2.at(y, x);
                    double n1 = 1.0 + taut * std::sqrt(u1x * u1x + u1y * u1y);
                    double n2 = 1.0 + taut * std::sqrt(u2x * u2x + u2y * u2y);
                    p11.at(y, x) = (p11.at(y, x) + taut * u1x) / n1;
                    p12.at(y, x) = (p12.at(y, x) + taut * u1y) / n1;
                    p21.at(y, x) = (p21.at(y, x) + taut * u2x) / n2;
                    p22.at(y, x) = (p22.at(y, x) + taut * u2y) / n2;
                }
        }
    }
}

Tensor to_gray(const Tensor& img) {
    if (img.rank() == 2) return img;
    if (img.rank() == 3 && img.extent(2) == 3) return grayscale(img);
    throw std::invalid_argument("flow input must be [H,W] or [H,W,3]");
}

}  // namespace

Tensor estimate_flow(const Tensor& prev, const Tensor& next, const FlowParams& params) {
    Tensor g0 = to_gray(prev), g1 = to_gray(next);
    if (g0.shape() != g1.shape()) {
        throw std::invalid_argument("flow frames must share a shape");
    }
    int h = g0.extent(0), w = g0.extent(1);
    // joint range normalization to [0,255]
    double lo = g0.data()[0], hi = g0.data()[0];
    for (std::size_t i = 0; i < g0.size(); ++i) {
        lo = std::min({lo, g0.data()[i], g1.data()[i]});
        hi = std::max({hi, g0.data()[i], g1.data()[i]});
    }
    Tensor n0({h, w}), n1({h, w});
    double span = hi - lo;
    for (std::size_t i = 0; i < g0.size(); ++i) {
        n0.data()[i] = span > 0 ? 255.0 * (g0.data()[i] - lo) / span : 0.0;
        n1.data()[i] = span > 0 ? 255.0 * (g1.data()[i] - lo) / span : 0.0;
    }
    n0 = gaussian_smooth(n0, params.presmooth_sigma);
    n1 = gaussian_smooth(n1, params.presmooth_sigma);

    int levels = params.pyramid_levels;
    while (levels > 1 && (h >> (levels - 1)) < 8) --levels;
    while (levels > 1 && (w >> (levels - 1)) < 8) --levels;
    std::vector<Tensor> pyr0{n0}, pyr1{n1};
    for (int l = 1; l < levels; ++l) {
        pyr0.push_back(downsample_half(pyr0.back()));
        pyr1.push_back(downsample_half(pyr1.back()));
    }
    Tensor u1({pyr0.back().extent(0), pyr0.back().extent(1)});
    Tensor u2(u1.shape());
    for (int l = levels - 1; l >= 0; --l) {
        tvl1_level(pyr0[static_cast<std::size_t>(l)], pyr1[static_cast<std::size_t>(l)], u1, u2,
                   params);
        if (l > 0) {
            int nh = pyr0[static_cast<std::size_t>(l - 1)].extent(0);
            int nw = pyr0[static_cast<std::size_t>(l - 1)].extent(1);
            double fy = static_cast<double>(nh) / u1.extent(0);
            double fx = static_cast<double>(nw) / u1.extent(1);
            Tensor up1 = resize_bilinear(u1, nh, nw);
            Tensor up2 = resize_bilinear(u2, nh, nw);
            for (std::size_t i = 0; i < up1.size(); ++i) {
                up1.data()[i] *= fx;
                up2.data()[i] *= fy;
            }
            u1 = std::move(up1);
            u2 = std::move(up2);
        }
    }
    Tensor out({h, w, 2});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            out.at(y, x, 0) = u1.at(y, x);
            out.at(y, x, 1) = u2.at(y, x);
        }
    if (!out.all_finite()) throw std::runtime_error("flow produced non-finite values");
    return out;
}

Tensor flow_to_image(const Tensor& flow) {
    if (flow.rank() != 3 || flow.extent(2) != 2) {
        throw std::invalid_argument("flow_to_image expects [H,W,2]");
    }
    int h = flow.extent(0), w = flow.extent(1);
    Tensor out({h, w, 3});
    auto quantize = [](double x) {
        x = std::max(-20.0, std::min(20.0, x));
        double scaled = (x + 20.0) * 255.0 / 40.0;
        // round half away from zero (scaled is non-negative here)
        return std::floor(scaled + 0.5);
    };
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            out.at(y, x, 0) = quantize(flow.at(y, x, 0));
            out.at(y, x, 1) = quantize(flow.at(y, x, 1));
            out.at(y, x, 2) = 0.0;
        }
    return out;
}

}  // namespace mov
