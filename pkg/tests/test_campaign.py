from __future__ import annotations

import pytest

from contbench.campaign import (
    Variant,
    build_default_pairing,
    campaign_runs,
    run_campaign,
    run_experiment,
    standard_variants,
    variant_documents,
)
from contbench.config import ConfigError, load_experiment, make_experiment
from contbench.engine import load_run_meta
from contbench.metrics import MetricsError


def shrink_workflow(exp_dir, repetitions=3):
    wf = exp_dir / "workflow.yaml"
    wf.write_text(wf.read_text().replace("repetitions: 100", f"repetitions: {repetitions}"))


class TestVariantDocuments:
    def test_patches_approach_rate_and_profiles(self, savanna_copy):
        base = load_experiment(savanna_copy)
        variant = Variant("cloud_centric-25k", "25k", "cloud_centric", "25Kbit",
                          edge_profile="rpi4", cloud_profile="skylake")
        docs = variant_documents(base, variant)
        cfg = make_experiment(docs["layers_services.yaml"], docs["network.yaml"], docs["workflow.yaml"])
        client = cfg.layers_services.layer("edge").services[0]
        server = cfg.layers_services.layer("cloud").services[0]
        assert client.params["approach"] == "cloud_centric"
        assert client.profile == "rpi4"
        assert server.profile == "skylake"
        assert cfg.network.rules[0].rate_bps == 25000.0
        assert cfg.label == "cloud_centric-25k"
        assert cfg.group == "25k"

    def test_standard_variants_grid(self):
        variants = standard_variants()
        assert len(variants) == 4
        assert {v.label for v in variants} == {
            "cloud_centric-15k", "hybrid-15k", "cloud_centric-25k", "hybrid-25k",
        }


class TestRunExperiment:
    def test_validation_failure_raises(self, savanna_copy, tmp_path):
        net = savanna_copy / "network.yaml"
        net.write_text(net.read_text().replace("src: edge", "src: fog"))
        cfg = load_experiment(savanna_copy)
        with pytest.raises(ConfigError, match="fog"):
            run_experiment(cfg, 1, tmp_path / "out")


class TestCampaign:
    def test_campaign_and_default_pairing(self, savanna_copy, tmp_path):
        shrink_workflow(savanna_copy)
        a = run_campaign(savanna_copy, tmp_path / "a", standard_variants(), seed=1)
        b = run_campaign(
            savanna_copy, tmp_path / "b",
            standard_variants(edge_profile="rpi4", cloud_profile="skylake"), seed=2,
        )
        runs = campaign_runs(a)
        assert set(runs) == {"cloud_centric-15k", "hybrid-15k", "cloud_centric-25k", "hybrid-25k"}
        assert all(load_run_meta(meta["path"])["status"] == "succeeded" for meta in runs.values())
        pairing = build_default_pairing(a, b)
        assert set(pairing) == {
            "processing_time_15k", "processing_time_25k", "bytes_to_cloud", "cpu_pct", "mem_gb",
        }
        assert pairing["processing_time_25k"].treatment1 == "cloud_centric-25k"

    def test_pairing_requires_complete_group(self, savanna_copy, tmp_path):
        shrink_workflow(savanna_copy)
        variants = [v for v in standard_variants() if v.label == "hybrid-15k"]
        a = run_campaign(savanna_copy, tmp_path / "a", variants, seed=1)
        b = run_campaign(savanna_copy, tmp_path / "b", variants, seed=2)
        with pytest.raises(MetricsError, match="group"):
            build_default_pairing(a, b)
