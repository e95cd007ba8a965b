"""Scenario generation, file formats and Monte Carlo campaigns."""
from .campaign import CampaignSpec, campaign_csv, run_campaign, summarize
from .generate import GeneratorParams, generate_connected_formation, generate_scenario
from .io import (FormatError, parse_partition, parse_scenario, read_partition, read_scenario,
                 write_partition, write_scenario)
