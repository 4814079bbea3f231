use clap::{Arg, ArgMatches, Args, Command, FromArgMatches};
use cybersick_core::train::TrainConfig;

/// One optional `--<key>` flag per [`TrainConfig::KEYS`] entry.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFlags {
    pub overrides: Vec<(String, String)>,
}

impl ConfigFlags {
    pub fn apply(&self, config: &mut TrainConfig) -> cybersick_core::Result<()> {
        for (k, v) in &self.overrides {
            config.set(k, v)?;
        }
        Ok(())
    }
}

impl FromArgMatches for ConfigFlags {
    fn from_arg_matches(matches: &ArgMatches) -> Result<Self, clap::Error> {
        let mut flags = Self::default();
        flags.update_from_arg_matches(matches)?;
        Ok(flags)
    }

    fn update_from_arg_matches(&mut self, matches: &ArgMatches) -> Result<(), clap::Error> {
        for key in TrainConfig::KEYS {
            if let Some(v) = matches.get_one::<String>(key.name) {
                self.overrides.retain(|(k, _)| k != key.name);
                self.overrides.push((key.name.to_string(), v.clone()));
            }
        }
        Ok(())
    }
}

impl Args for ConfigFlags {
    fn augment_args(mut cmd: Command) -> Command {
        let defaults = TrainConfig::default();
        for key in TrainConfig::KEYS {
            let default = defaults.get(key.name).unwrap_or_default();
            cmd = cmd.arg(
                Arg::new(key.name)
                    .long(key.name)
                    .value_name("VALUE")
                    .help(format!("{} [default: {default}]", key.help))
                    .help_heading("Configuration"),
            );
        }
        cmd
    }

    fn augment_args_for_update(cmd: Command) -> Command {
        Self::augment_args(cmd)
    }
}
