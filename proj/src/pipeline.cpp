#include "mov/pipeline.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "mov/flow.hpp"
#include "mov/image.hpp"
#include "mov/rng.hpp"
#include "mov/signalprep.hpp"

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace mov {

namespace {

std::string frame_path(const std::string& data_root, const ManifestRecord& r, int k) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%03d.ppm", k);
    return (fs::path(data_root) / r.video_dir / name).string();
}

// Flow aux: one flow image per consecutive selected pair, the final flow
// repeated so the auxiliary sequence matches the frame count.
std::vector<Tensor> flow_images(const std::vector<Tensor>& frames) {
    if (frames.size() < 2) throw std::invalid_argument("flow needs at least two frames");
    std::vector<Tensor> out;
    for (std::size_t i = 0; i + 1 < frames.size(); ++i) {
        out.push_back(flow_to_image(estimate_flow(frames[i], frames[i + 1])));
    }
    out.push_back(out.back());
    return out;
}

Tensor slice_time(const Tensor& s, int start, int width) {
    int mel = s.extent(0);
    Tensor out({mel, width});
    for (int m = 0; m < mel; ++m)
        for (int t = 0; t < width; ++t) out.at(m, t) = s.at(m, start + t);
    return out;
}

Tensor full_spectrogram(const std::string& data_root, const ManifestRecord& r, int mel_bins) {
    Waveform w = load_record_audio(data_root, r);
    return normalize_spectrogram(log_mel_spectrogram(resample_to_16k_mono(w), mel_bins));
}

SampleView assemble_video(std::vector<Tensor> frames_hwc, const ModelConfig& mc,
                          const SpatialAug& aug) {
    SampleView view;
    for (auto& f : frames_hwc) f = apply_spatial_aug(f, aug);
    for (const auto& f : frames_hwc) view.video_chw.push_back(image_to_chw(f));
    if (!mc.audio_aux()) {
        for (const auto& fl : flow_images(frames_hwc)) view.aux_chw.push_back(image_to_chw(fl));
    }
    return view;
}

std::vector<Tensor> select_frames(const std::string& data_root, const ManifestRecord& r,
                                  const std::vector<int>& idx) {
    std::vector<Tensor> frames;
    for (int k : idx) frames.push_back(load_ppm(frame_path(data_root, r, k)));
    return frames;
}

int eval_start(int t, int n_views, int room) {
    if (room <= 0) return 0;
    if (n_views == 1) return room / 2;
    double pos = static_cast<double>(t) * room / (n_views - 1);
    return static_cast<int>(std::lround(pos));
}

// Packs a frame stack into one rank-2 tensor for the cache; geometry comes
// back from the model config on load.
Tensor pack_stack(const std::vector<Tensor>& stack) {
    int n = static_cast<int>(stack.size());
    int per = static_cast<int>(stack[0].size());
    Tensor out({n, per});
    for (int i = 0; i < n; ++i) {
        std::copy(stack[i].data(), stack[i].data() + per, out.data() + i * per);
    }
    return out;
}

std::vector<Tensor> unpack_stack(const Tensor& packed, const std::vector<int>& shape) {
    std::vector<Tensor> out;
    int per = packed.extent(1);
    for (int i = 0; i < packed.extent(0); ++i) {
        Tensor t(shape);
        if (static_cast<int>(t.size()) != per) {
            throw std::invalid_argument("cached stack does not match the configured geometry");
        }
        std::copy(packed.data() + i * per, packed.data() + (i + 1) * per, t.data());
        out.push_back(std::move(t));
    }
    return out;
}

std::string view_path(const std::string& cache_dir, const std::string& id,
                      const std::string& tag) {
    return (fs::path(cache_dir) / "views" / (id + "." + tag + ".movt")).string();
}

json cache_settings(const ModelConfig& mc, int eval_views, std::uint64_t seed) {
    json j;
    j["schema"] = 1;
    j["aux"] = mc.aux;
    j["frames"] = mc.frames;
    j["stride"] = mc.stride;
    j["height"] = mc.vit.image_h;
    j["width"] = mc.vit.image_w;
    j["mel_bins"] = mc.mel_bins;
    j["crop_frames"] = mc.crop_frames;
    j["time_mask_max"] = mc.time_mask_max;
    j["freq_mask_max"] = mc.freq_mask_max;
    j["eval_views"] = eval_views;
    j["seed"] = seed;
    return j;
}

void save_view(const std::string& cache_dir, const std::string& id, const std::string& tag,
               const SampleView& view) {
    save_movt(view_path(cache_dir, id, tag + ".video"), pack_stack(view.video_chw));
    save_movt(view_path(cache_dir, id, tag + ".aux"), pack_stack(view.aux_chw));
}

SampleView load_view(const std::string& cache_dir, const ModelConfig& mc, const std::string& id,
                     const std::string& tag) {
    SampleView view;
    std::vector<int> img = {3, mc.vit.image_h, mc.vit.image_w};
    view.video_chw = unpack_stack(load_movt(view_path(cache_dir, id, tag + ".video")), img);
    std::vector<int> aux_shape = mc.audio_aux() ? std::vector<int>{3, mc.mel_bins, mc.crop_frames} : img;
    view.aux_chw = unpack_stack(load_movt(view_path(cache_dir, id, tag + ".aux")), aux_shape);
    return view;
}

}  // namespace

std::vector<Tensor> load_record_frames(const std::string& data_root, const ManifestRecord& r) {
    std::vector<Tensor> frames;
    for (int k = 0; k < r.frames; ++k) frames.push_back(load_ppm(frame_path(data_root, r, k)));
    return frames;
}

Waveform load_record_audio(const std::string& data_root, const ManifestRecord& r) {
    return load_wav((fs::path(data_root) / r.audio_path).string());
}

SampleView build_train_view(const std::string& data_root, const ManifestRecord& r,
                            const ModelConfig& mc, std::uint64_t seed) {
    mc.validate();
    Rng rng(derive_seed(seed, "view"));
    auto idx = sample_frame_indices(r.frames, mc.frames, mc.stride, rng);
    SpatialAug aug = draw_spatial_aug(rng, true);
    SampleView view = assemble_video(select_frames(data_root, r, idx), mc, aug);
    if (mc.audio_aux()) {
        Tensor s = full_spectrogram(data_root, r, mc.mel_bins);
        Tensor crop = crop_and_augment_spectrogram(s, derive_seed(seed, "spec"), mc.crop_frames,
                                                   mc.time_mask_max, mc.freq_mask_max);
        view.aux_chw.push_back(expand_three_channels(crop));
    }
    return view;
}

std::vector<SampleView> build_eval_views(const std::string& data_root, const ManifestRecord& r,
                                         const ModelConfig& mc, int n_views) {
    mc.validate();
    if (n_views < 1) throw std::invalid_argument("need at least one evaluation view");
    int span = (mc.frames - 1) * mc.stride + 1;
    Tensor spec;
    if (mc.audio_aux()) spec = full_spectrogram(data_root, r, mc.mel_bins);
    std::vector<SampleView> views;
    for (int t = 0; t < n_views; ++t) {
        int start = eval_start(t, n_views, r.frames - span);
        auto idx = frame_indices_from(start, r.frames, mc.frames, mc.stride);
        SampleView view = assemble_video(select_frames(data_root, r, idx), mc, SpatialAug{});
        if (mc.audio_aux()) {
            if (spec.extent(1) < mc.crop_frames) {
                throw std::invalid_argument("spectrogram shorter than the crop length");
            }
            int s0 = eval_start(t, n_views, spec.extent(1) - mc.crop_frames);
            view.aux_chw.push_back(expand_three_channels(slice_time(spec, s0, mc.crop_frames)));
        }
        views.push_back(std::move(view));
    }
    return views;
}

void preprocess_manifest(const DatasetManifest& m, const std::string& data_root,
                         const ModelConfig& mc, int eval_views, std::uint64_t seed,
                         const std::string& cache_dir, int jobs) {
    mc.validate();
    validate_manifest(m);
    if (eval_views < 1) throw std::invalid_argument("need at least one evaluation view");
    if (jobs < 1) throw std::invalid_argument("jobs must be at least 1");
    fs::create_directories(fs::path(cache_dir) / "views");

    // Records are independent and write disjoint files, so they can be
    // processed on separate threads without coordination.
    auto process = [&](const ManifestRecord& r) {
        if (r.split == "base-train") {
            SampleView v = build_train_view(data_root, r, mc, derive_seed(seed, "view." + r.id));
            save_view(cache_dir, r.id, "train", v);
        } else {
            auto views = build_eval_views(data_root, r, mc, eval_views);
            for (int t = 0; t < eval_views; ++t) {
                save_view(cache_dir, r.id, "eval" + std::to_string(t), views[t]);
            }
        }
    };
    int n = static_cast<int>(m.records.size());
    int workers = std::min(jobs, n);
    if (workers <= 1) {
        for (const auto& r : m.records) process(r);
    } else {
        std::atomic<int> next{0};
        std::mutex err_mutex;
        std::exception_ptr first_error;
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
                    try {
                        process(m.records[static_cast<std::size_t>(i)]);
                    } catch (...) {
                        std::lock_guard<std::mutex> lock(err_mutex);
                        if (!first_error) first_error = std::current_exception();
                        return;
                    }
                }
            });
        }
        for (auto& t : pool) t.join();
        if (first_error) std::rethrow_exception(first_error);
    }
    std::ofstream out(fs::path(cache_dir) / "cache.json");
    out << cache_settings(mc, eval_views, seed).dump(2) << "\n";
    if (!out) throw std::runtime_error("failed to write the cache settings");
}

void verify_cache(const std::string& cache_dir, const ModelConfig& mc, int eval_views,
                  std::uint64_t seed) {
    std::ifstream in(fs::path(cache_dir) / "cache.json");
    if (!in) throw std::invalid_argument("preprocessed cache not found: " + cache_dir);
    json found = json::parse(in, nullptr, true);
    json want = cache_settings(mc, eval_views, seed);
    if (found != want) {
        throw std::invalid_argument("preprocessed cache was built with different settings");
    }
}

SampleView load_train_view(const std::string& cache_dir, const ModelConfig& mc,
                           const std::string& id) {
    return load_view(cache_dir, mc, id, "train");
}

std::vector<SampleView> load_eval_views(const std::string& cache_dir, const ModelConfig& mc,
                                        const std::string& id, int n_views) {
    std::vector<SampleView> views;
    for (int t = 0; t < n_views; ++t) {
        views.push_back(load_view(cache_dir, mc, id, "eval" + std::to_string(t)));
    }
    return views;
}

}  // namespace mov
