#include <doctest.h>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "evsr/common.hpp"
#include "evsr/gradcheck.hpp"
#include "evsr/network.hpp"

using namespace evsr;

namespace {

ArchConfig tiny_arch(int scale = 2, int seq_len = 3) {
    ArchConfig a;
    a.stack_channels = 3;
    a.scale = scale;
    a.filters = 8;
    a.efr_filters = 8;
    a.rnet_c_blocks = 2;
    a.rnet_abd_blocks = 1;
    a.mixer_filters = 8;
    a.sequence_length = seq_len;
    return a;
}

template <typename T>
Tensor<T> random_tensor(std::mt19937_64& rng, const Shape& shape, double span = 1.0) {
    std::uniform_real_distribution<double> dist(-span, span);
    Tensor<T> t = Tensor<T>::zeros(shape);
    for (auto& v : t.data) v = static_cast<T>(dist(rng));
    return t;
}

template <typename T>
void zero_params(SRNet<T>& model, const std::string& prefix = "") {
    for (const auto& [name, var] : model.params.entries())
        if (prefix.empty() || name.rfind(prefix, 0) == 0)
            std::fill(var->value.data.begin(), var->value.data.end(), T(0));
}

EventStream random_stream(std::mt19937_64& rng, int w, int h, int n) {
    std::uniform_real_distribution<double> time(0.0, 1.0);
    std::vector<double> times(n);
    for (auto& t : times) t = time(rng);
    std::sort(times.begin(), times.end());
    std::vector<Event> events;
    events.reserve(n);
    for (int i = 0; i < n; ++i)
        events.push_back({times[i], static_cast<int>(rng() % w), static_cast<int>(rng() % h),
                          (rng() % 2) ? 1 : -1});
    return EventStream(w, h, std::move(events));
}

EventStack neutral_stack(int w, int h, int c) {
    EventStack st;
    st.width = w;
    st.height = h;
    st.channels = c;
    st.raw.assign(static_cast<std::size_t>(c) * h * w, 128);
    return st;
}

} // namespace

TEST_CASE("rectifier accepts paired and central-only inputs at equal dims") {
    const ArchConfig arch = tiny_arch();
    SRNet<float> model(arch, 5);
    std::mt19937_64 rng(41);
    const Tensor<float> own = random_tensor<float>(rng, Shape{1, 3, 16, 12});
    const Tensor<float> central = random_tensor<float>(rng, Shape{1, 3, 16, 12});
    FlowField flow(12, 16);
    std::fill(flow.dx.begin(), flow.dx.end(), 0.7f);

    const Tensor<float> paired = make_efr_input<float>(arch, own, &central, &flow);
    CHECK(paired.shape == Shape{1, 8, 16, 12});
    const Tensor<float> alone = make_efr_input<float>(arch, central, nullptr, nullptr);
    CHECK(alone.shape == Shape{1, 8, 16, 12});
    // central-only: reference and flow slots read as zeros
    for (int ch = 3; ch < 8; ++ch)
        for (int i = 0; i < 16 * 12; ++i) CHECK(alone.data[ch * 16 * 12 + i] == 0.0f);

    const auto re = efr_forward(model, paired);
    CHECK(re->value.shape == Shape{1, 8, 16, 12});
    const auto re2 = efr_forward(model, alone);
    CHECK(re2->value.shape == Shape{1, 8, 16, 12});
}

TEST_CASE("zero-weight rectifier maps everything to zero") {
    SRNet<float> model(tiny_arch(), 6);
    zero_params(model, "efr.");
    std::mt19937_64 rng(42);
    const Tensor<float> in =
        make_efr_input<float>(model.arch, random_tensor<float>(rng, Shape{1, 3, 8, 8}), nullptr,
                              nullptr);
    const auto re = efr_forward(model, in);
    for (float v : re->value.data) CHECK(v == 0.0f);
}

TEST_CASE("projection produces the upscaled state shape") {
    std::mt19937_64 rng(43);
    SUBCASE("scale 2") {
        SRNet<float> model(tiny_arch(2), 7);
        const auto re = ag::constant(random_tensor<float>(rng, Shape{1, 8, 8, 16}));
        const auto state = srnet_init_state(model, re);
        CHECK(state->value.shape == Shape{1, 8, 16, 32});
    }
    SUBCASE("scale 4") {
        SRNet<float> model(tiny_arch(4), 7);
        const auto re = ag::constant(random_tensor<float>(rng, Shape{1, 8, 8, 8}));
        const auto state = srnet_init_state(model, re);
        CHECK(state->value.shape == Shape{1, 8, 32, 32});
    }
}

TEST_CASE("zero rectified input with fresh weights gives zero state") {
    SRNet<float> model(tiny_arch(), 8); // biases initialize to zero
    const auto re = ag::constant(Tensor<float>::zeros(Shape{1, 8, 8, 8}));
    const auto state = srnet_init_state(model, re);
    for (float v : state->value.data) CHECK(v == 0.0f);
}

TEST_CASE("construction is seed-deterministic") {
    SRNet<float> a(tiny_arch(), 11), b(tiny_arch(), 11), c(tiny_arch(), 12);
    REQUIRE(a.params.size() == b.params.size());
    bool all_equal = true, any_differs = false;
    for (std::size_t i = 0; i < a.params.entries().size(); ++i) {
        const auto& [an, av] = a.params.entries()[i];
        const auto& [bn, bv] = b.params.entries()[i];
        CHECK(an == bn);
        if (av->value.data != bv->value.data) all_equal = false;
        if (av->value.data != c.params.entries()[i].second->value.data) any_differs = true;
    }
    CHECK(all_equal);
    CHECK(any_differs);
}

TEST_CASE("zeroed correction net turns the step into a pure refresh") {
    SRNet<float> model(tiny_arch(), 13);
    zero_params(model, "rnet_b.");
    std::mt19937_64 rng(44);
    const auto re = ag::constant(random_tensor<float>(rng, Shape{1, 8, 8, 8}));
    const auto state = ag::constant(random_tensor<float>(rng, Shape{1, 8, 16, 16}));
    const auto proj = model.rnet_c(re);
    const auto [image, next] = srnet_step(model, re, state);
    REQUIRE(next->value.shape == proj->value.shape);
    for (std::size_t i = 0; i < next->value.data.size(); ++i)
        CHECK(next->value.data[i] == proj->value.data[i]);
    CHECK(image->value.shape == Shape{1, 1, 16, 16});
}

TEST_CASE("all-zero weights collapse the cell to zero") {
    SRNet<float> model(tiny_arch(), 14);
    zero_params(model);
    std::mt19937_64 rng(45);
    const auto re = ag::constant(random_tensor<float>(rng, Shape{1, 8, 8, 8}));
    const auto state = ag::constant(random_tensor<float>(rng, Shape{1, 8, 16, 16}));
    const auto [image, next] = srnet_step(model, re, state);
    for (float v : next->value.data) CHECK(v == 0.0f);
    for (float v : image->value.data) CHECK(v == 0.0f);
}

TEST_CASE("step gradients reach all four projection groups") {
    SRNet<double> model(tiny_arch(), 15);
    std::mt19937_64 rng(46);
    const auto re = ag::constant(random_tensor<double>(rng, Shape{1, 8, 8, 8}));
    const auto state = ag::constant(random_tensor<double>(rng, Shape{1, 8, 16, 16}));
    const auto [image, next] = srnet_step(model, re, state);
    ag::zero_grad(model.params.vars());
    ag::backward(ag::mean_all(image));

    for (const std::string group : {"rnet_a.", "rnet_b.", "rnet_c.", "rnet_d."}) {
        bool nonzero = false;
        for (const auto& [name, var] : model.params.entries()) {
            if (name.rfind(group, 0) != 0 || !var->grad.defined()) continue;
            for (double g : var->grad.data)
                if (g != 0.0) nonzero = true;
        }
        CHECK_MESSAGE(nonzero, "no gradient reached ", group);
    }
}

TEST_CASE("full cell survives finite-difference checking") {
    SRNet<double> model(tiny_arch(), 16);
    std::mt19937_64 rng(47);
    const Tensor<double> re_t = random_tensor<double>(rng, Shape{1, 8, 8, 8});
    const Tensor<double> state_t = random_tensor<double>(rng, Shape{1, 8, 16, 16});

    std::vector<ag::Var<double>> params;
    for (const auto& [name, var] : model.params.entries())
        if (name.rfind("efr.", 0) != 0 && name.rfind("mixer.", 0) != 0) params.push_back(var);

    ag::GradCheckConfig cfg;
    cfg.coords_per_tensor = 4;
    const auto forward = [&] {
        const auto [image, next] =
            srnet_step(model, ag::constant(re_t), ag::constant(state_t));
        return ag::mean_all(image);
    };
    const auto res = ag::grad_check(forward, params, cfg);
    CHECK(res.max_rel_err < 1e-4);
    CHECK(res.coords_checked > 100);
}

TEST_CASE("mixer arity is enforced") {
    std::mt19937_64 rng(48);
    SRNet<float> model(tiny_arch(), 17);
    std::vector<ag::Var<float>> images;
    for (int i = 0; i < 3; ++i)
        images.push_back(ag::constant(random_tensor<float>(rng, Shape{1, 1, 16, 16})));
    const auto out = mixer_forward(model, images);
    CHECK(out->value.shape == Shape{1, 1, 16, 16});

    images.pop_back();
    CHECK_THROWS_AS(mixer_forward(model, images), ShapeError);

    SRNet<float> single(tiny_arch(2, 1), 18);
    const auto solo = mixer_forward(
        single, {ag::constant(random_tensor<float>(rng, Shape{1, 1, 8, 8}))});
    CHECK(solo->value.shape == Shape{1, 1, 8, 8});
}

TEST_CASE("pipeline modes") {
    std::mt19937_64 rng(49);
    const EventStream stream = random_stream(rng, 16, 16, 500);
    StackConfig scfg;
    scfg.events_per_channel = 20;
    scfg.channels = 3;
    const double anchor = stream[250].t;
    const StackSequence seq = build_sequence(stream, anchor, scfg, 3, 0);
    SRNet<float> model(tiny_arch(), 19);

    SUBCASE("main mode output shape and finiteness") {
        const auto res = pipeline_forward(model, seq);
        REQUIRE(res.output->value.shape == Shape{1, 1, 32, 32});
        for (float v : res.output->value.data) CHECK(std::isfinite(v));
        CHECK(!res.first_pass);
    }
    SUBCASE("zeroed flow also runs") {
        const auto res = pipeline_forward(model, seq, PipelineMode::main, FlowSource::zeroed);
        CHECK(res.output->value.shape == Shape{1, 1, 32, 32});
    }
    SUBCASE("two-pass matches the main shape and keeps pass 1") {
        const auto res = pipeline_forward(model, seq, PipelineMode::duo_pass);
        CHECK(res.output->value.shape == Shape{1, 1, 32, 32});
        REQUIRE(res.first_pass);
        CHECK(res.first_pass->value.shape == Shape{1, 1, 32, 32});
    }
    SUBCASE("frame-assisted mode needs a frame with stack dims") {
        CHECK_THROWS_AS(pipeline_forward(model, seq, PipelineMode::complementary), Error);
        const Image bad(8, 8, 0.5f);
        CHECK_THROWS_AS(
            pipeline_forward(model, seq, PipelineMode::complementary, FlowSource::estimated, &bad),
            ShapeError);
        const Image frame(16, 16, 0.5f);
        const auto res =
            pipeline_forward(model, seq, PipelineMode::complementary, FlowSource::estimated, &frame);
        CHECK(res.output->value.shape == Shape{1, 1, 32, 32});
    }
    SUBCASE("wrong sequence length is rejected") {
        StackSequence bad = seq;
        bad.stacks.pop_back();
        CHECK_THROWS_AS(pipeline_forward(model, bad), ShapeError);
    }
    SUBCASE("all-neutral stacks still produce finite output") {
        StackSequence flat;
        flat.central_index = 1;
        for (int i = 0; i < 3; ++i) flat.stacks.push_back(neutral_stack(16, 16, 3));
        const auto res = pipeline_forward(model, flat);
        for (float v : res.output->value.data) CHECK(std::isfinite(v));
    }
    SUBCASE("swapping the side stacks changes the output") {
        const auto base = pipeline_forward(model, seq);
        StackSequence swapped = seq;
        std::swap(swapped.stacks[0], swapped.stacks[2]);
        const auto res = pipeline_forward(model, swapped);
        double diff = 0.0;
        for (std::size_t i = 0; i < res.output->value.data.size(); ++i)
            diff = std::max(diff, std::abs(static_cast<double>(res.output->value.data[i]) -
                                           base.output->value.data[i]));
        CHECK(diff > 0.0);
    }
}

TEST_CASE("clamped image emission") {
    Tensor<float> t = Tensor<float>::zeros(Shape{1, 1, 2, 2});
    t.data = {-0.5f, 0.25f, 0.75f, 1.5f};
    const Image img = tensor_to_image(t);
    CHECK(img.at(0, 0) == 0.0f);
    CHECK(img.at(0, 1) == 0.25f);
    CHECK(img.at(1, 0) == 0.75f);
    CHECK(img.at(1, 1) == 1.0f);
    CHECK_THROWS_AS(tensor_to_image(Tensor<float>::zeros(Shape{1, 2, 2, 2})), ShapeError);
}

TEST_CASE("arch validation") {
    ArchConfig a = tiny_arch();
    a.scale = 3;
    CHECK_THROWS_AS(a.validate(), Error);
    a = tiny_arch();
    a.sequence_length = 4;
    CHECK_THROWS_AS(a.validate(), Error);
    a = tiny_arch();
    a.filters = 0;
    CHECK_THROWS_AS(a.validate(), Error);
}
