#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "evsr/autograd.hpp"
#include "evsr/common.hpp"
#include "evsr/flow.hpp"
#include "evsr/layers.hpp"
#include "evsr/stacking.hpp"

namespace evsr {

// Hyperparameters of the reconstruction model. The default is the desk-scale
// configuration; tests shrink filters/depths for speed.
struct ArchConfig {
    int stack_channels = 3; // c: channels per event stack
    int scale = 2;          // spatial upscale factor, 2 or 4
    int filters = 32;       // F: feature width of the recurrent core
    int efr_filters = 32;   // Fe: rectifier feature width
    int rnet_c_blocks = 15;
    int rnet_abd_blocks = 5;
    int mixer_filters = 32;
    int sequence_length = 3; // S: stacks per reconstruction, odd

    int halvings() const { return scale == 4 ? 2 : 1; }
    int efr_input_channels() const { return 2 * stack_channels + 2; }

    void validate() const {
        if (stack_channels < 1) throw Error("arch: stack_channels must be positive");
        if (scale != 2 && scale != 4) throw Error("arch: scale must be 2 or 4");
        if (filters < 1 || efr_filters < 1 || mixer_filters < 1)
            throw Error("arch: filter counts must be positive");
        if (rnet_c_blocks < 1 || rnet_abd_blocks < 1)
            throw Error("arch: block counts must be positive");
        if (sequence_length < 1 || sequence_length % 2 == 0)
            throw Error("arch: sequence_length must be odd and positive");
    }

    bool operator==(const ArchConfig&) const = default;
};

// Event feature rectifier: two 3x3 convolutions with PReLU. Input is the
// fixed-width concatenation [own stack | central stack | flow dx, dy]; the
// central stack's own pass zero-pads the reference and flow slots.
template <typename T>
struct EFR {
    nn::Conv2d<T> conv1, conv2;
    nn::PReLU<T> act1, act2;

    EFR() = default;
    EFR(nn::ParamStore<T>& store, std::mt19937_64& rng, const ArchConfig& arch)
        : conv1(store, "efr.conv1", rng, arch.efr_input_channels(), arch.efr_filters, 3, 1, 1),
          conv2(store, "efr.conv2", rng, arch.efr_filters, arch.efr_filters, 3, 1, 1),
          act1(store, "efr.act1"),
          act2(store, "efr.act2") {}

    ag::Var<T> operator()(const ag::Var<T>& x) const { return act2(conv2(act1(conv1(x)))); }
};

// High-resolution projection: head conv, deep residual trunk at LR, then one
// stride-2 transposed conv per halving, and a linear tail conv. This is the
// only LR-to-SR path in the model.
template <typename T>
struct RNetC {
    nn::Conv2d<T> head;
    nn::PReLU<T> head_act;
    std::vector<nn::ResBlock<T>> blocks;
    std::vector<nn::ConvTranspose2d<T>> ups;
    std::vector<nn::PReLU<T>> up_acts;
    nn::Conv2d<T> tail;

    RNetC() = default;
    RNetC(nn::ParamStore<T>& store, std::mt19937_64& rng, const ArchConfig& arch)
        : head(store, "rnet_c.head", rng, arch.efr_filters, arch.filters, 3, 1, 1),
          head_act(store, "rnet_c.head_act") {
        for (int i = 0; i < arch.rnet_c_blocks; ++i)
            blocks.emplace_back(store, "rnet_c.block" + std::to_string(i), rng, arch.filters);
        for (int i = 0; i < arch.halvings(); ++i) {
            ups.emplace_back(store, "rnet_c.up" + std::to_string(i), rng, arch.filters,
                             arch.filters, 4, 2, 1);
            up_acts.emplace_back(store, "rnet_c.up_act" + std::to_string(i));
        }
        tail = nn::Conv2d<T>(store, "rnet_c.tail", rng, arch.filters, arch.filters, 3, 1, 1);
    }

    ag::Var<T> operator()(const ag::Var<T>& x) const {
        ag::Var<T> h = head_act(head(x));
        for (const auto& b : blocks) h = b(h);
        for (std::size_t i = 0; i < ups.size(); ++i) h = up_acts[i](ups[i](h));
        return tail(h);
    }
};

// Back-projection encoder: mirrors RNetC's upsampling with stride-2 downs so
// the state can be compared against a fresh projection at equal shape.
template <typename T>
struct RNetA {
    std::vector<nn::Conv2d<T>> downs;
    std::vector<nn::PReLU<T>> down_acts;
    std::vector<nn::ResBlock<T>> blocks;
    std::vector<nn::ConvTranspose2d<T>> ups;
    std::vector<nn::PReLU<T>> up_acts;

    RNetA() = default;
    RNetA(nn::ParamStore<T>& store, std::mt19937_64& rng, const ArchConfig& arch) {
        for (int i = 0; i < arch.halvings(); ++i) {
            downs.emplace_back(store, "rnet_a.down" + std::to_string(i), rng, arch.filters,
                               arch.filters, 4, 2, 1);
            down_acts.emplace_back(store, "rnet_a.down_act" + std::to_string(i));
        }
        for (int i = 0; i < arch.rnet_abd_blocks; ++i)
            blocks.emplace_back(store, "rnet_a.block" + std::to_string(i), rng, arch.filters);
        for (int i = 0; i < arch.halvings(); ++i) {
            ups.emplace_back(store, "rnet_a.up" + std::to_string(i), rng, arch.filters,
                             arch.filters, 4, 2, 1);
            up_acts.emplace_back(store, "rnet_a.up_act" + std::to_string(i));
        }
    }

    ag::Var<T> operator()(const ag::Var<T>& x) const {
        ag::Var<T> h = x;
        for (std::size_t i = 0; i < downs.size(); ++i) h = down_acts[i](downs[i](h));
        for (const auto& b : blocks) h = b(h);
        for (std::size_t i = 0; i < ups.size(); ++i) h = up_acts[i](ups[i](h));
        return h;
    }
};

// Residual correction of the projection difference. The final projection conv
// (no skip) makes zero weights the zero map, so zeroing this net reduces the
// update to a pure state reset.
template <typename T>
struct RNetB {
    std::vector<nn::ResBlock<T>> blocks;
    nn::Conv2d<T> proj;

    RNetB() = default;
    RNetB(nn::ParamStore<T>& store, std::mt19937_64& rng, const ArchConfig& arch) {
        for (int i = 0; i < arch.rnet_abd_blocks; ++i)
            blocks.emplace_back(store, "rnet_b.block" + std::to_string(i), rng, arch.filters);
        proj = nn::Conv2d<T>(store, "rnet_b.proj", rng, arch.filters, arch.filters, 3, 1, 1);
    }

    ag::Var<T> operator()(const ag::Var<T>& x) const {
        ag::Var<T> h = x;
        for (const auto& b : blocks) h = b(h);
        return proj(h);
    }
};

// State readout to a single intensity channel.
template <typename T>
struct RNetD {
    std::vector<nn::ResBlock<T>> blocks;
    nn::Conv2d<T> out;

    RNetD() = default;
    RNetD(nn::ParamStore<T>& store, std::mt19937_64& rng, const ArchConfig& arch) {
        for (int i = 0; i < arch.rnet_abd_blocks; ++i)
            blocks.emplace_back(store, "rnet_d.block" + std::to_string(i), rng, arch.filters);
        out = nn::Conv2d<T>(store, "rnet_d.out", rng, arch.filters, 1, 3, 1, 1);
    }

    ag::Var<T> operator()(const ag::Var<T>& x) const {
        ag::Var<T> h = x;
        for (const auto& b : blocks) h = b(h);
        return out(h);
    }
};

// Fuses the per-stack intermediate images into the final frame.
template <typename T>
struct Mixer {
    nn::Conv2d<T> conv1, conv2;
    nn::PReLU<T> act;

    Mixer() = default;
    Mixer(nn::ParamStore<T>& store, std::mt19937_64& rng, const ArchConfig& arch)
        : conv1(store, "mixer.conv1", rng, arch.sequence_length, arch.mixer_filters, 3, 1, 1),
          conv2(store, "mixer.conv2", rng, arch.mixer_filters, 1, 3, 1, 1),
          act(store, "mixer.act") {}

    ag::Var<T> operator()(const ag::Var<T>& x) const { return conv2(act(conv1(x))); }
};

// The full model: parameters register in a fixed declaration order, weights
// draw from one seeded generator, so construction is reproducible.
template <typename T>
struct SRNet {
    ArchConfig arch;
    nn::ParamStore<T> params;
    EFR<T> efr;
    RNetC<T> rnet_c;
    RNetA<T> rnet_a;
    RNetB<T> rnet_b;
    RNetD<T> rnet_d;
    Mixer<T> mixer;

    explicit SRNet(const ArchConfig& a, std::uint64_t seed = 1) : arch(a) {
        arch.validate();
        std::mt19937_64 rng(seed);
        efr = EFR<T>(params, rng, arch);
        rnet_c = RNetC<T>(params, rng, arch);
        rnet_a = RNetA<T>(params, rng, arch);
        rnet_b = RNetB<T>(params, rng, arch);
        rnet_d = RNetD<T>(params, rng, arch);
        mixer = Mixer<T>(params, rng, arch);
    }
};

// Pixel displacements arrive on the stack grid; dividing by this constant
// brings typical desk-scale flows into the same unit range as the stack
// channels so the rectifier's first conv sees comparably scaled inputs.
inline constexpr float kFlowInputScale = 0.125f;

// Assembles the fixed-width rectifier input for one stack: the stack being
// rectified first, then the central reference and the flow planes (scaled by
// kFlowInputScale), either of which may be absent (central's own pass) and
// read as zeros.
template <typename T>
Tensor<T> make_efr_input(const ArchConfig& arch, const Tensor<T>& own, const Tensor<T>* central,
                         const FlowField* flow) {
    const int c = arch.stack_channels;
    const int h = own.shape.d[2], w = own.shape.d[3];
    if (own.shape.d[1] != c)
        throw ShapeError("efr input: stack has " + std::to_string(own.shape.d[1]) +
                         " channels, expected " + std::to_string(c));
    Tensor<T> in = Tensor<T>::zeros(Shape{1, arch.efr_input_channels(), h, w});
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    std::copy(own.data.begin(), own.data.end(), in.data.begin());
    if (central) {
        if (central->shape.d[1] != c || central->shape.d[2] != h || central->shape.d[3] != w)
            throw ShapeError("efr input: central stack shape mismatch");
        std::copy(central->data.begin(), central->data.end(), in.data.begin() + c * plane);
    }
    if (flow) {
        if (flow->width != w || flow->height != h)
            throw ShapeError("efr input: flow dims mismatch");
        for (std::size_t i = 0; i < plane; ++i) {
            in.data[2 * c * plane + i] = static_cast<T>(flow->dx[i] * kFlowInputScale);
            in.data[(2 * c + 1) * plane + i] = static_cast<T>(flow->dy[i] * kFlowInputScale);
        }
    }
    return in;
}

template <typename T>
ag::Var<T> efr_forward(const SRNet<T>& model, const Tensor<T>& input) {
    return model.efr(ag::constant(input));
}

// First stack: state is the plain projection, no correction step.
template <typename T>
ag::Var<T> srnet_init_state(const SRNet<T>& model, const ag::Var<T>& re) {
    return model.rnet_c(re);
}

// One recurrent update. The fresh projection is computed once and reused for
// both the difference and the additive refresh:
//   proj   = RNetC(RE)
//   e      = proj - RNetA(State)
//   State' = RNetB(e) + proj
//   I      = RNetD(State')
template <typename T>
std::pair<ag::Var<T>, ag::Var<T>> srnet_step(const SRNet<T>& model, const ag::Var<T>& re,
                                             const ag::Var<T>& state) {
    const ag::Var<T> proj = model.rnet_c(re);
    const ag::Var<T> e = ag::sub(proj, model.rnet_a(state));
    const ag::Var<T> next = ag::add(model.rnet_b(e), proj);
    return {model.rnet_d(next), next};
}

template <typename T>
ag::Var<T> mixer_forward(const SRNet<T>& model, const std::vector<ag::Var<T>>& images) {
    if (static_cast<int>(images.size()) != model.arch.sequence_length)
        throw ShapeError("mixer: got " + std::to_string(images.size()) + " images, configured for " +
                         std::to_string(model.arch.sequence_length));
    return model.mixer(ag::concat_channels(images));
}

enum class PipelineMode { main, duo_pass, complementary };
enum class FlowSource { estimated, zeroed };

template <typename T>
struct PipelineResult {
    ag::Var<T> output;     // pre-clamp (1, 1, s*h, s*w); clamp at emission
    ag::Var<T> first_pass; // duo_pass: the pass-1 output, otherwise null
};

// Clamped [0, 1] view of a (1, 1, h, w) tensor.
template <typename T>
Image tensor_to_image(const Tensor<T>& t) {
    if (t.shape.nd != 4 || t.shape.d[0] != 1 || t.shape.d[1] != 1)
        throw ShapeError("tensor_to_image: expected (1, 1, h, w), got " + t.shape.str());
    Image img(t.shape.d[3], t.shape.d[2]);
    for (std::size_t i = 0; i < img.px.size(); ++i) {
        const T v = t.data[i];
        img.px[i] = static_cast<float>(v < T(0) ? T(0) : (v > T(1) ? T(1) : v));
    }
    return img;
}

namespace detail {

// Replacement central channels for the second pass: an intensity frame mapped
// into the stack's normalized range and replicated across the c channels.
template <typename T>
Tensor<T> frame_as_central(const ArchConfig& arch, const Image& frame,
                           StackConfig::Normalize normalize) {
    Tensor<T> out = Tensor<T>::zeros(
        Shape{1, arch.stack_channels, frame.height, frame.width});
    const std::size_t plane = static_cast<std::size_t>(frame.height) * frame.width;
    for (int c = 0; c < arch.stack_channels; ++c)
        for (std::size_t i = 0; i < plane; ++i) {
            const T v = static_cast<T>(frame.px[i]);
            out.data[c * plane + i] =
                normalize == StackConfig::Normalize::signed_unit ? T(2) * v - T(1) : v;
        }
    return out;
}

template <typename T>
ag::Var<T> run_pass(const SRNet<T>& model, const std::vector<Tensor<T>>& stack_inputs,
                    const std::vector<FlowField>& flows, const Tensor<T>& central_channels) {
    const int s_len = model.arch.sequence_length;
    const int central = s_len / 2;
    std::vector<ag::Var<T>> images;
    ag::Var<T> state;
    for (int k = 0; k < s_len; ++k) {
        const Tensor<T> in =
            k == central
                ? make_efr_input<T>(model.arch, central_channels, nullptr, nullptr)
                : make_efr_input<T>(model.arch, stack_inputs[k], &central_channels, &flows[k]);
        const ag::Var<T> re = model.efr(ag::constant(in));
        if (k == 0) {
            state = srnet_init_state(model, re);
            images.push_back(model.rnet_d(state));
        } else {
            auto [image, next] = srnet_step(model, re, state);
            state = next;
            images.push_back(image);
        }
    }
    return mixer_forward(model, images);
}

} // namespace detail

// Runs the full reconstruction around one anchor. Flow is estimated from each
// side stack toward the central stack (or zeroed); the two-pass and
// frame-assisted modes substitute the central stack's channels while keeping
// the event-derived flows.
template <typename T>
PipelineResult<T> pipeline_forward(const SRNet<T>& model, const StackSequence& seq,
                                   PipelineMode mode = PipelineMode::main,
                                   FlowSource flow_source = FlowSource::estimated,
                                   const Image* lr_frame = nullptr) {
    const int s_len = model.arch.sequence_length;
    if (static_cast<int>(seq.stacks.size()) != s_len)
        throw ShapeError("pipeline: sequence has " + std::to_string(seq.stacks.size()) +
                         " stacks, configured for " + std::to_string(s_len));
    if (mode == PipelineMode::complementary && lr_frame == nullptr)
        throw Error("pipeline: complementary mode needs an input frame");
    const int central = s_len / 2;
    const EventStack& central_stack = seq.stacks[central];

    std::vector<Tensor<T>> stack_inputs;
    stack_inputs.reserve(seq.stacks.size());
    for (const EventStack& st : seq.stacks) stack_inputs.push_back(to_network_input<T>(st));

    std::vector<FlowField> flows(seq.stacks.size());
    for (int k = 0; k < s_len; ++k) {
        if (k == central) continue;
        flows[k] = flow_source == FlowSource::estimated
                       ? estimate_flow(seq.stacks[k], central_stack)
                       : FlowField(central_stack.width, central_stack.height);
    }

    PipelineResult<T> result;
    if (mode == PipelineMode::main) {
        result.output = detail::run_pass(model, stack_inputs, flows, stack_inputs[central]);
        return result;
    }
    if (mode == PipelineMode::complementary) {
        if (lr_frame->width != central_stack.width || lr_frame->height != central_stack.height)
            throw ShapeError("pipeline: frame dims must match the stacks");
        const Tensor<T> central_channels =
            detail::frame_as_central<T>(model.arch, *lr_frame, central_stack.normalize);
        result.output = detail::run_pass(model, stack_inputs, flows, central_channels);
        return result;
    }
    // duo_pass: reconstruct, feed the downscaled result back as the central
    result.first_pass = detail::run_pass(model, stack_inputs, flows, stack_inputs[central]);
    const Image pass1 = tensor_to_image(result.first_pass->value);
    const Image pass1_lr = box_downsample(pass1, model.arch.scale);
    const Tensor<T> central_channels =
        detail::frame_as_central<T>(model.arch, pass1_lr, central_stack.normalize);
    result.output = detail::run_pass(model, stack_inputs, flows, central_channels);
    return result;
}

} // namespace evsr
